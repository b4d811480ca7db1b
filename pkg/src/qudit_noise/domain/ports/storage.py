"""Artifact storage port interface."""

from abc import ABC, abstractmethod
from pathlib import Path


class IArtifactStoragePort(ABC):
    """Interface for artifact storage adapters.

    Paths passed to the port are relative to the storage root of one run.
    """

    @property
    @abstractmethod
    def root(self) -> Path:
        """Directory that relative artifact paths resolve against."""

    @abstractmethod
    async def write_bytes(self, relative_path: str, data: bytes) -> Path:
        """Write an artifact.

        Args:
            relative_path: Path below the storage root.
            data: File contents.

        Returns:
            The absolute path written.

        Raises:
            StorageError: If writing fails.
        """

    @abstractmethod
    async def read_bytes(self, relative_path: str) -> bytes:
        """Read an artifact.

        Args:
            relative_path: Path below the storage root.

        Returns:
            The file contents.

        Raises:
            StorageError: If the file is missing or unreadable.
        """

    @abstractmethod
    async def file_exists(self, relative_path: str) -> bool:
        """Check whether an artifact exists.

        Args:
            relative_path: Path below the storage root.

        Returns:
            True if the file exists.
        """

    @abstractmethod
    async def ensure_directory(self, directory: Path) -> None:
        """Ensure a directory exists, creating it if necessary.

        Args:
            directory: The directory path.

        Raises:
            StorageError: If creation fails.
        """
