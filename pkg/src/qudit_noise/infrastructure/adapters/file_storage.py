"""File storage adapter."""

import logging
from pathlib import Path

import aiofiles
import aiofiles.os

from qudit_noise.domain.exceptions import StorageError
from qudit_noise.domain.ports.storage import IArtifactStoragePort

logger = logging.getLogger(__name__)


class FileStorage(IArtifactStoragePort):
    """File system storage adapter rooted at one run directory."""

    def __init__(self, base_path: Path | None = None) -> None:
        """Initialize file storage.

        Args:
            base_path: Run directory. Defaults to ``./output``.
        """
        self._root = base_path or Path.cwd() / "output"

    @property
    def root(self) -> Path:
        """Run directory."""
        return self._root

    def _resolve(self, relative_path: str) -> Path:
        path = Path(relative_path)
        if path.is_absolute() or ".." in path.parts:
            raise StorageError(f"Artifact path must stay inside the run directory: {relative_path}")
        return self._root / path

    async def write_bytes(self, relative_path: str, data: bytes) -> Path:
        """Write an artifact below the run directory.

        Args:
            relative_path: Path below the run directory.
            data: File contents.

        Returns:
            The absolute path written.

        Raises:
            StorageError: If writing fails.
        """
        target = self._resolve(relative_path)
        try:
            await self.ensure_directory(target.parent)
            async with aiofiles.open(target, "wb") as f:
                await f.write(data)
        except StorageError:
            raise
        except OSError as e:
            logger.error(f"Failed to write {target}: {e}")
            raise StorageError(f"Failed to write {relative_path}: {e}") from e
        logger.debug(f"Wrote {len(data)} bytes to {target}")
        return target

    async def read_bytes(self, relative_path: str) -> bytes:
        """Read an artifact.

        Args:
            relative_path: Path below the run directory.

        Returns:
            The file contents.

        Raises:
            StorageError: If reading fails.
        """
        target = self._resolve(relative_path)
        try:
            async with aiofiles.open(target, "rb") as f:
                return await f.read()
        except FileNotFoundError as e:
            raise StorageError(f"File not found: {target}") from e
        except OSError as e:
            raise StorageError(f"Failed to read file: {e}") from e

    async def file_exists(self, relative_path: str) -> bool:
        """Check if an artifact exists.

        Args:
            relative_path: Path below the run directory.

        Returns:
            True if the file exists.
        """
        try:
            return await aiofiles.os.path.exists(self._resolve(relative_path))
        except (OSError, StorageError):
            return False

    async def ensure_directory(self, directory: Path) -> None:
        """Ensure a directory exists, creating it if necessary.

        Args:
            directory: The directory path.

        Raises:
            StorageError: If creation fails.
        """
        try:
            if not await aiofiles.os.path.exists(directory):
                await aiofiles.os.makedirs(directory, exist_ok=True)
                logger.debug(f"Created directory: {directory}")
        except OSError as e:
            raise StorageError(f"Failed to create directory: {e}") from e
