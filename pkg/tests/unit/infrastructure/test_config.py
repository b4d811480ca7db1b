"""Unit tests for process-level configuration."""

from pathlib import Path

import pytest

from qudit_noise.domain.exceptions import ConfigurationError
from qudit_noise.infrastructure.config import AppConfig, get_config, set_config


class TestAppConfig:
    """Tests for AppConfig."""

    def test_defaults(self):
        """Test default settings."""
        config = AppConfig()

        assert config.output_dir == Path("output")
        assert config.log_level == "INFO"
        assert config.max_grid_points == 2_500_000
        assert config.workers == 4

    def test_unknown_log_level(self):
        """Test that an unknown log level names its variable."""
        with pytest.raises(ConfigurationError) as exc_info:
            AppConfig(log_level="CHATTY")

        assert exc_info.value.field == "QUDIT_NOISE_LOG_LEVEL"

    def test_grid_budget_floor(self):
        """Test that the grid budget must allow a 16^3 grid."""
        AppConfig(max_grid_points=16**3)
        with pytest.raises(ConfigurationError, match="16\\^3"):
            AppConfig(max_grid_points=16**3 - 1)

    def test_workers_positive(self):
        """Test that at least one worker is required."""
        with pytest.raises(ConfigurationError, match="worker"):
            AppConfig(workers=0)

    def test_from_env(self, monkeypatch, tmp_path):
        """Test reading every variable from the environment."""
        monkeypatch.setenv("QUDIT_NOISE_OUTPUT_DIR", str(tmp_path))
        monkeypatch.setenv("QUDIT_NOISE_LOG_LEVEL", "debug")
        monkeypatch.setenv("QUDIT_NOISE_MAX_GRID_POINTS", "1e5")
        monkeypatch.setenv("QUDIT_NOISE_WORKERS", "8")

        config = AppConfig.from_env()

        assert config.output_dir == tmp_path
        assert config.log_level == "DEBUG"
        assert config.max_grid_points == 100_000
        assert config.workers == 8

    def test_from_env_defaults(self, monkeypatch):
        """Test that unset variables take their defaults."""
        for name in (
            "QUDIT_NOISE_OUTPUT_DIR",
            "QUDIT_NOISE_LOG_LEVEL",
            "QUDIT_NOISE_MAX_GRID_POINTS",
            "QUDIT_NOISE_WORKERS",
        ):
            monkeypatch.delenv(name, raising=False)

        assert AppConfig.from_env() == AppConfig()

    def test_from_env_unparseable(self, monkeypatch):
        """Test that a non-numeric value raises ConfigurationError."""
        monkeypatch.setenv("QUDIT_NOISE_WORKERS", "many")

        with pytest.raises(ConfigurationError, match="Invalid environment setting"):
            AppConfig.from_env()


class TestGlobalConfig:
    """Tests for the process-wide configuration instance."""

    def test_set_and_get(self, tmp_path):
        """Test that set_config replaces the global instance."""
        config = AppConfig(output_dir=tmp_path, workers=1)
        set_config(config)
        try:
            assert get_config() is config
        finally:
            set_config(AppConfig())

    def test_app_config_fixture(self, app_config, temp_output_dir):
        """Test the shared fixture installs a temporary output root."""
        assert get_config().output_dir == temp_output_dir
        assert get_config().workers == 2
