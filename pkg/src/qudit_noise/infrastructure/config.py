"""Application configuration."""

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from qudit_noise.domain.exceptions import ConfigurationError

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")


@dataclass
class AppConfig:
    """Process-level settings read from the environment."""

    # Storage settings
    output_dir: Path = field(default_factory=lambda: Path("output"))

    # Logging
    log_level: str = "INFO"

    # Numerics
    max_grid_points: int = 2_500_000
    workers: int = 4

    def __post_init__(self) -> None:
        """Validate settings."""
        if self.log_level not in LOG_LEVELS:
            raise ConfigurationError(
                f"Unknown log level '{self.log_level}'", field="QUDIT_NOISE_LOG_LEVEL"
            )
        if self.max_grid_points < 16**3:
            raise ConfigurationError(
                "Grid budget must allow at least 16^3 points", field="QUDIT_NOISE_MAX_GRID_POINTS"
            )
        if self.workers < 1:
            raise ConfigurationError("At least one worker is required", field="QUDIT_NOISE_WORKERS")

    @classmethod
    def from_env(cls) -> "AppConfig":
        """Create configuration from environment variables.

        Returns:
            AppConfig instance with values from environment.

        Raises:
            ConfigurationError: If a variable cannot be parsed.
        """
        try:
            return cls(
                output_dir=Path(os.getenv("QUDIT_NOISE_OUTPUT_DIR", "output")),
                log_level=os.getenv("QUDIT_NOISE_LOG_LEVEL", "INFO").upper(),
                max_grid_points=int(float(os.getenv("QUDIT_NOISE_MAX_GRID_POINTS", "2.5e6"))),
                workers=int(os.getenv("QUDIT_NOISE_WORKERS", "4")),
            )
        except ValueError as e:
            raise ConfigurationError(f"Invalid environment setting: {e}") from e


# Global configuration instance
_config: Optional[AppConfig] = None


def get_config() -> AppConfig:
    """Get the global configuration instance.

    Returns:
        The application configuration.
    """
    global _config
    if _config is None:
        _config = AppConfig.from_env()
    return _config


def set_config(config: AppConfig) -> None:
    """Set the global configuration instance.

    Args:
        config: The configuration to set.
    """
    global _config
    _config = config
