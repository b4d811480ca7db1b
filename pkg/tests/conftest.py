"""Pytest configuration and fixtures."""

from pathlib import Path

import numpy as np
import pytest

from qudit_noise.application.dtos.run_config import (
    ChargeRunConfig,
    FieldsRunConfig,
    ParityRunConfig,
    PowerLawRunConfig,
    SpectrumRunConfig,
)
from qudit_noise.domain.services import (
    ClassifyService,
    FieldService,
    SpectralService,
    SpectrumService,
    SynthService,
)
from qudit_noise.domain.value_objects import TransmonParams
from qudit_noise.infrastructure.config import AppConfig, set_config


@pytest.fixture
def spectrum_service() -> SpectrumService:
    """Spectrum service with the default truncation."""
    return SpectrumService()


@pytest.fixture
def synth_service() -> SynthService:
    """Synthetic data generators."""
    return SynthService()


@pytest.fixture
def classify_service() -> ClassifyService:
    """Mixture and hidden-Markov inference."""
    return ClassifyService()


@pytest.fixture
def spectral_service() -> SpectralService:
    """PSD estimation and fitting."""
    return SpectralService()


@pytest.fixture
def field_service() -> FieldService:
    """Relaxation solver with a tight tolerance for small grids."""
    return FieldService(tolerance=1e-9, max_iterations=50_000)


@pytest.fixture
def device_params() -> TransmonParams:
    """The characterised device: E_J = 6.3366 GHz, E_C = 208.3 MHz."""
    return TransmonParams.device()


@pytest.fixture
def rng() -> np.random.Generator:
    """Seeded generator for test data."""
    return np.random.default_rng(1234)


@pytest.fixture
def temp_output_dir(tmp_path: Path) -> Path:
    """Temporary output root for tests."""
    output_dir = tmp_path / "output"
    output_dir.mkdir()
    return output_dir


@pytest.fixture
def app_config(temp_output_dir: Path):
    """Install a process configuration rooted in a temporary directory."""
    config = AppConfig(output_dir=temp_output_dir, workers=2)
    set_config(config)
    yield config
    set_config(AppConfig())


@pytest.fixture
def small_spectrum_config() -> SpectrumRunConfig:
    """Coarse spectrum scan."""
    return SpectrumRunConfig(grid_points=21)


@pytest.fixture
def small_parity_config() -> ParityRunConfig:
    """Half a second of parity telemetry at the anchored dwell and duty cycle."""
    return ParityRunConfig(duration_s=0.5, hmm_restarts=1, nperseg=2048, dwell_tolerance=0.6)


@pytest.fixture
def small_charge_config() -> ChargeRunConfig:
    """Three well-separated configurations at two temperatures, time-compressed."""
    surrogate = {"n_samples": 4096, "nperseg": 512, "sample_interval_s": 0.1}
    return ChargeRunConfig(
        offsets_e=[0.05, 0.25, 0.45],
        noise_sigma_e=0.004,
        temperatures_mk=[10.0, 100.0],
        duration_h=4.0,
        time_compression=4.0,
        max_order=4,
        selection_restarts=1,
        selection_max_samples=2000,
        offset_noise=PowerLawRunConfig(alpha=1.94, amp_1hz=1.11e-6, **surrogate),
        frequency_noise=PowerLawRunConfig(alpha=2.06, amp_1hz=7.4e5, **surrogate),
        alpha_tolerance=0.5,
        amplitude_factor=10.0,
    )


@pytest.fixture
def small_fields_config() -> FieldsRunConfig:
    """Smoke-sized 16-cell grid spanning the default 3.2 mm box."""
    return FieldsRunConfig(cells=16, spacing_m=200e-6, tolerance=1e-6)
