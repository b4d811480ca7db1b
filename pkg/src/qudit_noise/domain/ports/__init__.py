"""Domain ports (interfaces)."""

from .storage import IArtifactStoragePort

__all__ = ["IArtifactStoragePort"]
