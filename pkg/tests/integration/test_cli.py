"""Integration tests for the command-line interface."""

import json

import pytest
from typer.testing import CliRunner

from qudit_noise import __version__
from qudit_noise.domain.exceptions import EigensolverError
from qudit_noise.domain.services import SpectrumService
from qudit_noise.infrastructure.config import AppConfig, set_config
from qudit_noise.presentation.cli import EXIT_CONFIG, EXIT_NUMERICAL, app

runner = CliRunner()


@pytest.fixture
def document(tmp_path):
    """Write a run document and return its path."""

    def write(payload, name="run.json"):
        path = tmp_path / name
        path.write_text(payload if isinstance(payload, str) else json.dumps(payload))
        return path

    return write


class TestCliBasics:
    """Tests for the informational commands."""

    def test_version(self):
        """Test --version prints the package version."""
        result = runner.invoke(app, ["--version"])

        assert result.exit_code == 0
        assert __version__ in result.output

    def test_info(self, app_config):
        """Test that info lists the numerical stack and resolved settings."""
        result = runner.invoke(app, ["info"])

        assert result.exit_code == 0
        assert "numpy" in result.output
        assert "Workers" in result.output

    def test_help_lists_commands(self):
        """Test that every pipeline command is registered."""
        result = runner.invoke(app, ["--help"])

        assert result.exit_code == 0
        for command in ("spectrum", "parity", "charge", "fields", "reproduce", "info"):
            assert command in result.output


class TestCliRuns:
    """Tests for pipeline commands and their exit codes."""

    def test_spectrum(self, app_config, document, tmp_path):
        """Test a spectrum run writes its manifest and exits 0."""
        config = document({"grid_points": 21})
        out = tmp_path / "spectrum_run"

        result = runner.invoke(app, ["spectrum", "-c", str(config), "-o", str(out), "-q"])

        assert result.exit_code == 0, result.output
        assert (out / "manifest.json").exists()
        assert (out / "spectrum.csv").exists()

    def test_default_output_root(self, app_config, document, temp_output_dir):
        """Test that runs default to <output root>/<command>."""
        config = document({"grid_points": 21})

        result = runner.invoke(app, ["spectrum", "-c", str(config), "-q"])

        assert result.exit_code == 0, result.output
        assert (temp_output_dir / "spectrum" / "manifest.json").exists()

    def test_seed_override_recorded(self, app_config, document, tmp_path):
        """Test that --seed wins over the run document."""
        config = document({"grid_points": 21, "seed": 1})
        out = tmp_path / "seeded"

        result = runner.invoke(app, ["spectrum", "-c", str(config), "-o", str(out), "-s", "9"])

        assert result.exit_code == 0, result.output
        assert json.loads((out / "manifest.json").read_text())["seed"] == 9

    @pytest.mark.parametrize(
        "payload",
        [
            {"n_cut": 2},
            {"grid_points": 20},
            {"bogus": 1},
            "{not json",
        ],
    )
    def test_invalid_document_exits_2(self, app_config, document, payload):
        """Test that invalid run documents exit with the configuration code."""
        config = document(payload)

        result = runner.invoke(app, ["spectrum", "-c", str(config)])

        assert result.exit_code == EXIT_CONFIG

    def test_negative_seed_rejected(self, app_config):
        """Test that a negative seed is a usage error."""
        result = runner.invoke(app, ["spectrum", "--seed", "-1"])

        assert result.exit_code == 2

    def test_grid_budget_exits_2(self, temp_output_dir):
        """Test that a grid above the process budget exits with the configuration code."""
        set_config(AppConfig(output_dir=temp_output_dir, max_grid_points=16**3))
        try:
            result = runner.invoke(app, ["fields", "-q"])
        finally:
            set_config(AppConfig())

        assert result.exit_code == EXIT_CONFIG

    def test_stage_failure_exits_3(self, app_config, document, tmp_path, monkeypatch):
        """Test that a numerical stage failure exits 3 after writing the manifest."""

        def fail(*args, **kwargs):
            raise EigensolverError("eigensolver did not converge", n_g=0.5)

        monkeypatch.setattr(SpectrumService, "spectrum_scan", fail)
        config = document({"grid_points": 21})
        out = tmp_path / "failed"

        result = runner.invoke(app, ["spectrum", "-c", str(config), "-o", str(out)])

        assert result.exit_code == EXIT_NUMERICAL
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["stages"]["spectrum"]["status"] == "FAILED"
