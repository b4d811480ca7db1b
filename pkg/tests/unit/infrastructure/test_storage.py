"""Unit tests for artifact storage and the manifest writer."""

import asyncio
import hashlib
import json

import pytest

from qudit_noise.domain.exceptions import StorageError
from qudit_noise.infrastructure.adapters.file_storage import FileStorage
from qudit_noise.infrastructure.manifest_writer import MANIFEST_NAME, ManifestWriter


class TestFileStorage:
    """Tests for FileStorage."""

    @pytest.fixture
    def storage(self, tmp_path):
        """Storage rooted in a temporary run directory."""
        return FileStorage(base_path=tmp_path / "run")

    @pytest.mark.asyncio
    async def test_write_and_read(self, storage):
        """Test that written bytes read back unchanged."""
        target = await storage.write_bytes("a/b/data.csv", b"x,y\n1,2\n")

        assert target == storage.root / "a" / "b" / "data.csv"
        assert await storage.read_bytes("a/b/data.csv") == b"x,y\n1,2\n"

    @pytest.mark.asyncio
    async def test_file_exists(self, storage):
        """Test existence checks before and after a write."""
        assert not await storage.file_exists("x.json")

        await storage.write_bytes("x.json", b"{}")

        assert await storage.file_exists("x.json")

    @pytest.mark.asyncio
    async def test_read_missing(self, storage):
        """Test that reading a missing artifact raises StorageError."""
        with pytest.raises(StorageError, match="not found"):
            await storage.read_bytes("missing.csv")

    @pytest.mark.asyncio
    @pytest.mark.parametrize("path", ["../escape.csv", "a/../../escape.csv", "/etc/passwd"])
    async def test_paths_stay_inside_run(self, storage, path):
        """Test that paths leaving the run directory are rejected."""
        with pytest.raises(StorageError, match="inside the run directory"):
            await storage.write_bytes(path, b"")

    @pytest.mark.asyncio
    async def test_escaping_path_does_not_exist(self, storage):
        """Test that an escaping path is reported as absent."""
        assert not await storage.file_exists("../anything")

    @pytest.mark.asyncio
    async def test_ensure_directory(self, storage, tmp_path):
        """Test directory creation."""
        directory = tmp_path / "nested" / "dir"

        await storage.ensure_directory(directory)

        assert directory.is_dir()


class TestManifestWriter:
    """Tests for ManifestWriter."""

    @pytest.fixture
    def storage(self, tmp_path):
        """Storage rooted in a temporary run directory."""
        return FileStorage(base_path=tmp_path)

    @pytest.fixture
    def writer(self, storage):
        """Writer for a spectrum run."""
        return ManifestWriter(storage, command="spectrum", seed=3, config_hash="0" * 64)

    @pytest.mark.asyncio
    async def test_write_records_checksum(self, writer):
        """Test that each artifact is listed with its checksum and size."""
        entry = await writer.write("spectrum.csv", b"n_g,E_0\n0.0,1.0\n", "spectrum-csv")

        assert entry.sha256 == hashlib.sha256(b"n_g,E_0\n0.0,1.0\n").hexdigest()
        assert entry.size == 16
        assert entry.format == "spectrum-csv"
        assert entry.version == 1

    @pytest.mark.asyncio
    async def test_payload_sorted(self, writer):
        """Test that files and stages are listed in sorted order."""
        await writer.write("z.csv", b"z", "table-csv")
        await writer.write("a.csv", b"a", "table-csv")
        await writer.record_stage("synthesize", "OK")
        await writer.record_stage("classify", "FAILED", "boom")

        payload = writer.payload({"quick": True})

        assert [f["path"] for f in payload["files"]] == ["a.csv", "z.csv"]
        assert list(payload["stages"]) == ["classify", "synthesize"]
        assert payload["stages"]["classify"] == {"status": "FAILED", "error": "boom"}
        assert payload["quick"] is True
        assert payload["seed"] == 3
        assert payload["command"] == "spectrum"

    @pytest.mark.asyncio
    async def test_finalize_writes_manifest(self, writer, tmp_path):
        """Test that finalize writes manifest.json matching the payload."""
        await writer.write("a.csv", b"a", "table-csv")

        document = await writer.finalize()

        on_disk = json.loads((tmp_path / MANIFEST_NAME).read_text())
        assert on_disk == document
        assert "timestamp" not in on_disk

    @pytest.mark.asyncio
    async def test_concurrent_writes(self, writer):
        """Test that concurrent writes are all recorded."""
        await asyncio.gather(
            *(writer.write(f"part_{k}.csv", str(k).encode(), "table-csv") for k in range(20))
        )

        assert len(writer.payload()["files"]) == 20

    @pytest.mark.asyncio
    async def test_verify_detects_changes(self, writer, tmp_path):
        """Test that verify reports artifacts changed after writing."""
        await writer.write("a.csv", b"a", "table-csv")
        await writer.write("b.csv", b"b", "table-csv")
        assert await writer.verify() == []

        (tmp_path / "b.csv").write_bytes(b"tampered")

        assert await writer.verify() == ["b.csv"]

    @pytest.mark.asyncio
    async def test_identical_runs_identical_manifests(self, tmp_path):
        """Test that two identical runs produce byte-identical manifests."""
        for name in ("first", "second"):
            writer = ManifestWriter(
                FileStorage(base_path=tmp_path / name),
                command="fields",
                seed=0,
                config_hash="f" * 64,
            )
            await writer.write("x.bin", b"\x00\x01", "grid-f8")
            await writer.record_stage("solve", "OK")
            await writer.finalize()

        assert (tmp_path / "first" / MANIFEST_NAME).read_bytes() == (
            tmp_path / "second" / MANIFEST_NAME
        ).read_bytes()
