"""Serialized artifact writing with checksum bookkeeping."""

import asyncio
import hashlib
import logging
from dataclasses import dataclass
from typing import Any, Optional

from qudit_noise.domain.ports.storage import IArtifactStoragePort
from qudit_noise.infrastructure.codecs import FORMAT_VERSION, encode_json

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


@dataclass(frozen=True)
class ArtifactEntry:
    """One emitted file."""

    path: str
    sha256: str
    size: int
    format: str
    version: int = FORMAT_VERSION


class ManifestWriter:
    """Write artifacts through one lock and record their checksums.

    Entries are emitted sorted by path and carry no timestamps, so identical
    runs produce byte-identical manifests.
    """

    def __init__(
        self,
        storage: IArtifactStoragePort,
        command: str,
        seed: int,
        config_hash: str,
    ) -> None:
        """Initialize the writer.

        Args:
            storage: Storage rooted at the run directory.
            command: Pipeline name recorded in the manifest.
            seed: Run seed.
            config_hash: SHA-256 of the canonical run configuration.
        """
        self._storage = storage
        self._command = command
        self._seed = seed
        self._config_hash = config_hash
        self._lock = asyncio.Lock()
        self._entries: dict[str, ArtifactEntry] = {}
        self._stages: dict[str, dict[str, Optional[str]]] = {}

    @property
    def storage(self) -> IArtifactStoragePort:
        """Underlying storage."""
        return self._storage

    async def write(self, relative_path: str, data: bytes, fmt: str) -> ArtifactEntry:
        """Write one artifact and record it.

        Args:
            relative_path: Path below the run directory.
            data: File contents.
            fmt: Format name, e.g. ``"shots-csv"``.

        Returns:
            The recorded entry.
        """
        entry = ArtifactEntry(
            path=relative_path,
            sha256=hashlib.sha256(data).hexdigest(),
            size=len(data),
            format=fmt,
        )
        async with self._lock:
            await self._storage.write_bytes(relative_path, data)
            self._entries[relative_path] = entry
        logger.debug(f"Artifact {relative_path} ({fmt}, {len(data)} bytes)")
        return entry

    async def record_stage(self, stage: str, status: str, error: Optional[str] = None) -> None:
        """Record the outcome of a pipeline stage (``OK`` or ``FAILED``)."""
        async with self._lock:
            self._stages[stage] = {"status": status, "error": error}

    def payload(self, extra: Optional[dict[str, Any]] = None) -> dict[str, Any]:
        """Manifest document with sorted entries."""
        document: dict[str, Any] = {
            "manifest_version": FORMAT_VERSION,
            "command": self._command,
            "seed": self._seed,
            "config_hash": self._config_hash,
            "files": [
                {
                    "path": e.path,
                    "sha256": e.sha256,
                    "size": e.size,
                    "format": e.format,
                    "version": e.version,
                }
                for _, e in sorted(self._entries.items())
            ],
            "stages": {name: self._stages[name] for name in sorted(self._stages)},
        }
        if extra:
            document.update(extra)
        return document

    async def finalize(self, extra: Optional[dict[str, Any]] = None) -> dict[str, Any]:
        """Write manifest.json and return its document."""
        document = self.payload(extra)
        async with self._lock:
            await self._storage.write_bytes(MANIFEST_NAME, encode_json(document))
        logger.info(f"Manifest written with {len(self._entries)} files")
        return document

    async def verify(self) -> list[str]:
        """Return the paths whose stored contents no longer match their checksums."""
        mismatched = []
        for path, entry in sorted(self._entries.items()):
            data = await self._storage.read_bytes(path)
            if hashlib.sha256(data).hexdigest() != entry.sha256:
                mismatched.append(path)
        return mismatched
