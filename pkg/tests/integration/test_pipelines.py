"""Integration tests running whole pipelines into a temporary directory."""

import hashlib
import json
import math

import pytest

from qudit_noise.application.commands.run_pipeline import PipelineKind, RunPipelineCommand
from qudit_noise.application.dtos.run_config import ReproduceRunConfig
from qudit_noise.application.handlers.pipeline_handler import PipelineHandler
from qudit_noise.infrastructure.codecs import decode_shots, decode_table
from qudit_noise.infrastructure.config import AppConfig


def assert_manifest_consistent(run_dir):
    """Every listed file exists with the recorded checksum and every stage passed."""
    manifest = json.loads((run_dir / "manifest.json").read_text())
    for entry in manifest["files"]:
        data = (run_dir / entry["path"]).read_bytes()
        assert hashlib.sha256(data).hexdigest() == entry["sha256"]
        assert len(data) == entry["size"]
    assert all(stage["status"] == "OK" for stage in manifest["stages"].values())
    return manifest


@pytest.fixture
def handler(tmp_path):
    """Handler writing below a temporary output root."""
    return PipelineHandler(app_config=AppConfig(output_dir=tmp_path, workers=2))


class TestSpectrumPipeline:
    """Integration tests for the spectrum pipeline."""

    @pytest.mark.asyncio
    async def test_run(self, handler, tmp_path, small_spectrum_config):
        """Test the artifacts and headline of a spectrum run."""
        result = await handler.handle(
            RunPipelineCommand(kind=PipelineKind.SPECTRUM, config=small_spectrum_config)
        )

        run_dir = tmp_path / "spectrum"
        manifest = assert_manifest_consistent(run_dir)
        assert {f["path"] for f in manifest["files"]} == {"spectrum.csv", "parity_bands.json"}
        assert 2.5 < result.headline["f01_ghz"] < 3.6
        assert result.headline["anharmonicity_mhz"] < 0


class TestParityPipeline:
    """Integration tests for the parity pipeline."""

    @pytest.mark.asyncio
    async def test_run(self, handler, tmp_path, small_parity_config):
        """Test that synthetic parity telemetry is decoded and its dwell recovered."""
        result = await handler.handle(
            RunPipelineCommand(kind=PipelineKind.PARITY, config=small_parity_config, seed=2)
        )

        run_dir = tmp_path / "parity"
        manifest = assert_manifest_consistent(run_dir)
        assert {f["path"] for f in manifest["files"]} == {
            "shots.csv",
            "shots.jsonl",
            "decoded_path.csv",
            "psd_parity.csv",
            "lorentzian_fit.json",
            "dwell_report.json",
            "models.json",
        }
        assert set(manifest["stages"]) == {
            "synthesize",
            "classify",
            "decode_even",
            "decode_odd",
            "psd_fit",
        }
        assert result.success
        recovered = result.headline["telegraph_dwell_ms"]
        assert math.isfinite(recovered) and recovered > 0
        assert result.headline["dwell_convention"] == "1/(pi f_c)"
        rows = {row.quantity: row for row in result.summary}
        assert rows["parity dwell time 1/(pi f_c) (s)"].recovered == pytest.approx(recovered / 1e3)

    @pytest.mark.asyncio
    async def test_shot_export(self, handler, tmp_path, small_parity_config):
        """Test that exported shots alternate bands on the duty cycle."""
        await handler.handle(
            RunPipelineCommand(kind=PipelineKind.PARITY, config=small_parity_config)
        )

        shots = decode_shots((tmp_path / "parity" / "shots.csv").read_bytes())
        report = json.loads((tmp_path / "parity" / "dwell_report.json").read_text())

        assert len(shots) == report["shots_exported"] == 20_000
        assert list(shots.band[:4]) == [0, 1, 0, 1]
        assert shots.t[1] - shots.t[0] == pytest.approx(25e-6)

    @pytest.mark.asyncio
    async def test_same_seed_same_artifacts(self, tmp_path, small_parity_config):
        """Test that one seed reproduces byte-identical artifacts."""
        manifests = []
        for name in ("a", "b"):
            handler = PipelineHandler(app_config=AppConfig(output_dir=tmp_path / name, workers=2))
            await handler.handle(
                RunPipelineCommand(kind=PipelineKind.PARITY, config=small_parity_config, seed=5)
            )
            manifests.append((tmp_path / name / "parity" / "manifest.json").read_bytes())

        assert manifests[0] == manifests[1]


class TestChargePipeline:
    """Integration tests for the charge-environment pipeline."""

    @pytest.mark.asyncio
    async def test_run(self, handler, tmp_path, small_charge_config):
        """Test traces, model selection, transition matrices and power-law fits."""
        result = await handler.handle(
            RunPipelineCommand(kind=PipelineKind.CHARGE, config=small_charge_config, seed=1)
        )

        run_dir = tmp_path / "charge"
        manifest = assert_manifest_consistent(run_dir)
        paths = {f["path"] for f in manifest["files"]}
        for label in ("10mK", "100mK"):
            assert f"charge_trace_{label}.csv" in paths
        for name in (
            "model_selection.csv",
            "dwell_report.json",
            "psd_offset_noise.csv",
            "psd_frequency_noise.csv",
            "power_law_fits.json",
        ):
            assert name in paths
        assert 1 <= result.headline["chosen_order"] <= 4
        assert len(decode_table((run_dir / "model_selection.csv").read_bytes())) >= 1

    @pytest.mark.asyncio
    async def test_planted_order_recovered(self, handler, tmp_path, small_charge_config):
        """Test that three well-separated configurations are found and decoded."""
        result = await handler.handle(
            RunPipelineCommand(kind=PipelineKind.CHARGE, config=small_charge_config, seed=1)
        )

        paths = {f.path for f in result.manifest.files}
        assert result.headline["chosen_order"] == 3
        assert "transition_10mK.csv" in paths
        assert "decoded_path_100mK.csv" in paths


class TestFieldsPipeline:
    """Integration tests for the electrostatics pipeline."""

    @pytest.mark.asyncio
    async def test_run(self, handler, tmp_path, small_fields_config):
        """Test induced-charge grids, sensitive volumes and the geometry report."""
        result = await handler.handle(
            RunPipelineCommand(kind=PipelineKind.FIELDS, config=small_fields_config)
        )

        run_dir = tmp_path / "fields"
        manifest = assert_manifest_consistent(run_dir)
        paths = {f["path"] for f in manifest["files"]}
        for geometry in ("differential", "single_island"):
            assert f"induced_{geometry}.bin" in paths
            assert f"induced_{geometry}.json" in paths
            assert f"induced_{geometry}_slice.csv" in paths
        assert "sensitive_volume.csv" in paths
        header = json.loads((run_dir / "induced_differential.json").read_text())
        assert header["dims"] == [17, 17, 17]
        assert (run_dir / "induced_differential.bin").stat().st_size == 17**3 * 8
        rows = decode_table((run_dir / "sensitive_volume.csv").read_bytes())
        assert len(rows) == len(small_fields_config.thresholds)
        report = json.loads((run_dir / "fields_report.json").read_text())
        assert report["reciprocity_check"]["geometry"] == "single_island"
        assert result.headline["grid_points"] == 17**3


class TestReproducePipeline:
    """Integration tests for the combined reproduction."""

    @pytest.mark.asyncio
    @pytest.mark.slow
    async def test_quick_reproduction(self, handler, tmp_path):
        """Test that a quick reproduction fills one directory and tabulates every pipeline."""
        result = await handler.handle(
            RunPipelineCommand(kind=PipelineKind.REPRODUCE, config=ReproduceRunConfig(), quick=True)
        )

        run_dir = tmp_path / "reproduce"
        manifest = json.loads((run_dir / "manifest.json").read_text())
        paths = {f["path"] for f in manifest["files"]}
        assert "summary.csv" in paths
        for prefix in ("spectrum/", "parity/", "charge/", "fields/"):
            assert any(path.startswith(prefix) for path in paths)
        assert manifest["quick"] is True
        assert len(decode_table((run_dir / "summary.csv").read_bytes())) == len(result.summary)
