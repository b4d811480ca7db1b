"""Run configuration documents.

Each pipeline reads one JSON document. The models validate it, apply quick
mode and convert to domain value objects.
"""

from typing import Literal, Optional, TypeVar
from typing_extensions import Self

from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from qudit_noise.domain.exceptions import ConfigurationError
from qudit_noise.domain.value_objects.electrostatics import GeometryScale
from qudit_noise.domain.value_objects.processes import (
    DEFAULT_OFFSETS_E,
    ChargeEnvConfig,
    ParityProcessConfig,
)
from qudit_noise.domain.value_objects.readout import IqClusterModel
from qudit_noise.domain.value_objects.spectra import PsdMethod, SegmentConfig
from qudit_noise.domain.value_objects.transmon import TransmonParams

QUICK_FACTOR = 100.0
QUICK_FIELD_CELLS = 24

ConfigT = TypeVar("ConfigT", bound="GlobalRunSettings")


class GlobalRunSettings(BaseModel):
    """Settings shared by every run document."""

    seed: int = Field(default=0, ge=0, description="Run seed; sub-stage seeds are spawned from it")
    output_dir: Optional[str] = Field(
        None, description="Run directory (defaults to <output root>/<command>)"
    )
    verbosity: Literal["quiet", "normal", "verbose"] = Field(
        default="normal", description="Console verbosity"
    )
    quick: bool = Field(default=False, description="Whether quick mode has been applied")

    model_config = {"extra": "forbid"}

    def quickened(self) -> Self:
        """Return a copy with quick-mode durations and tolerances."""
        return self.model_copy(update={"quick": True})


class SpectrumRunConfig(GlobalRunSettings):
    """Spectrum pipeline settings."""

    e_j_ghz: float = Field(default=6.3366, ge=0.0, description="Josephson energy E_J/h, GHz")
    e_c_ghz: float = Field(default=0.2083, gt=0.0, description="Charging energy E_C/h, GHz")
    n_cut: int = Field(default=15, ge=5, le=200, description="Charge-basis truncation")
    grid_points: int = Field(
        default=101, ge=5, description="Gate-charge points on [0, 1]; must be 1 mod 4"
    )
    max_level: int = Field(default=3, ge=1, le=10, description="Highest level to report")
    transitions: list[tuple[int, int]] = Field(
        default_factory=lambda: [(0, 1), (1, 2), (2, 3)],
        description="Single-photon transitions (i, j) to characterise",
    )
    two_photon_13: bool = Field(default=True, description="Also report the 1-3 two-photon line")

    @field_validator("grid_points")
    @classmethod
    def validate_grid_points(cls, v: int) -> int:
        """The grid must contain n_g = 0, 0.25 and 0.5."""
        if (v - 1) % 4:
            raise ValueError("grid_points must be 1 mod 4 so the grid holds 0, 0.25 and 0.5")
        return v

    @field_validator("transitions")
    @classmethod
    def validate_transitions(cls, v: list[tuple[int, int]]) -> list[tuple[int, int]]:
        """Require ordered level pairs."""
        for i, j in v:
            if i < 0 or j <= i:
                raise ValueError(f"Transition ({i}, {j}) must satisfy 0 <= i < j")
        return v

    @model_validator(mode="after")
    def validate_levels(self) -> Self:
        """Transitions must fit under max_level."""
        highest = max([j for _, j in self.transitions] + [3 if self.two_photon_13 else 0])
        if highest > self.max_level:
            raise ValueError(f"Transitions reach level {highest} above max_level={self.max_level}")
        return self

    def to_domain(self) -> TransmonParams:
        """Transmon energies."""
        return TransmonParams(e_j=self.e_j_ghz, e_c=self.e_c_ghz)


class ParityRunConfig(GlobalRunSettings):
    """Parity pipeline settings: telegraph process, readout clusters and analysis."""

    dwell_time_s: float = Field(default=5.9e-3, gt=0.0, description="Planted mean parity dwell")
    duty_cycle_s: float = Field(default=50e-6, gt=0.0, description="Even+odd probe cycle")
    duration_s: float = Field(default=60.0, gt=0.0, description="Record length")
    cluster_separation_v: float = Field(default=0.1, gt=0.0, description="I/Q cluster spacing")
    cluster_sigma_v: float = Field(default=0.02, ge=0.0, description="Per-quadrature noise")
    relaxation_21: float = Field(
        default=0.05, ge=0.0, le=1.0, description="Probability |2> reads as |1>"
    )
    gmm_restarts: int = Field(default=1, ge=1, description="Mixture restarts after the seeded one")
    gmm_training_shots: int = Field(
        default=200_000, ge=1000, description="Shots used to train the mixture"
    )
    hmm_restarts: int = Field(default=2, ge=1, description="Baum-Welch restarts per band")
    psd_method: PsdMethod = Field(default=PsdMethod.SEGMENT_AVERAGED, description="PSD estimator")
    nperseg: int = Field(default=2**15, ge=16, description="Welch segment length")
    fit_max_hz: Optional[float] = Field(
        None, gt=0.0, description="Upper Lorentzian fit bound (default: Nyquist / 4)"
    )
    dwell_tolerance: float = Field(
        default=0.15, gt=0.0, description="Allowed relative dwell deviation"
    )
    max_written_shots: int = Field(
        default=200_000, ge=0, description="Shots exported to shots.csv/jsonl; 0 writes all"
    )

    def quickened(self) -> Self:
        """Shorten the record 100x and widen the dwell tolerance."""
        return self.model_copy(
            update={
                "quick": True,
                "duration_s": self.duration_s / QUICK_FACTOR,
                "dwell_tolerance": max(self.dwell_tolerance, 0.6),
            }
        )

    def to_domain(self) -> tuple[ParityProcessConfig, IqClusterModel]:
        """Telegraph process and readout cluster model."""
        process = ParityProcessConfig(
            dwell_time=self.dwell_time_s,
            duty_cycle=self.duty_cycle_s,
            duration=self.duration_s,
            seed=self.seed,
        )
        if self.cluster_sigma_v == 0 and self.relaxation_21 == 0:
            clusters = IqClusterModel.noiseless(separation=self.cluster_separation_v)
        else:
            clusters = IqClusterModel.default(
                separation=self.cluster_separation_v,
                sigma=self.cluster_sigma_v,
                relaxation_21=self.relaxation_21,
            )
        return process, clusters

    def segmenting(self, n_samples: int) -> SegmentConfig:
        """PSD settings with the segment length capped at a quarter of the record."""
        if self.psd_method is PsdMethod.PERIODOGRAM:
            return SegmentConfig.periodogram()
        nperseg = self.nperseg
        while nperseg > 16 and nperseg * 4 > n_samples:
            nperseg //= 2
        return SegmentConfig(method=PsdMethod.SEGMENT_AVERAGED, nperseg=nperseg)


class PowerLawRunConfig(BaseModel):
    """One power-law surrogate: planted spectrum, sampling and fit band."""

    alpha: float = Field(..., gt=0.0, le=3.0, description="Planted spectral exponent")
    amp_1hz: float = Field(..., gt=0.0, description="Planted PSD at 1 Hz")
    n_samples: int = Field(default=2**16, ge=256, description="Surrogate length")
    sample_interval_s: float = Field(default=0.1, gt=0.0, description="Sampling interval")
    nperseg: int = Field(default=4096, ge=16, description="Welch segment length")
    fit_min_hz: float = Field(default=0.01, gt=0.0, description="Lower fit bound")
    fit_max_hz: float = Field(default=2.0, gt=0.0, description="Upper fit bound")

    model_config = {"extra": "forbid"}

    @model_validator(mode="after")
    def validate_band(self) -> Self:
        """The fit band must be ordered and below Nyquist."""
        if self.fit_min_hz >= self.fit_max_hz:
            raise ValueError("fit_min_hz must be below fit_max_hz")
        if self.fit_max_hz > 0.5 / self.sample_interval_s:
            raise ValueError("fit_max_hz exceeds the Nyquist frequency")
        return self


class ChargeRunConfig(GlobalRunSettings):
    """Charge-environment pipeline settings."""

    offsets_e: list[float] = Field(
        default_factory=lambda: list(DEFAULT_OFFSETS_E),
        min_length=1,
        description="Sorted configuration offsets in [0, 0.5] e",
    )
    noise_sigma_e: float = Field(default=0.004, ge=0.0, description="Measurement noise, e")
    stable_time_10mk_s: float = Field(
        default=22 * 60.0, gt=0.0, description="Mean configuration lifetime at 10 mK"
    )
    scramble_interval_s: float = Field(
        default=1.6 * 3600.0, gt=0.0, description="Mean time between scramble events"
    )
    temperatures_mk: list[float] = Field(
        default_factory=lambda: [10.0, 50.0, 100.0, 150.0],
        description="Fridge temperatures, mK",
    )
    temperature_exponent: float = Field(
        default=1.0, ge=0.0, description="Neighbour rate scales as T^exponent"
    )
    sample_interval_s: float = Field(default=2.0, gt=0.0, description="Offset sampling interval")
    duration_h: float = Field(default=70.0, gt=0.0, description="Record length per temperature")
    neighbor_reach: int = Field(default=2, ge=1, description="Largest neighbour index step")
    time_compression: float = Field(
        default=1.0, ge=1.0, description="Shrink time, raise rates; transition counts unchanged"
    )
    max_order: int = Field(default=19, ge=1, description="Largest mixture order scanned")
    selection_restarts: int = Field(default=2, ge=1, description="Restarts per scanned order")
    selection_max_samples: int = Field(
        default=20_000, ge=100, description="Subsample size for model selection"
    )
    hmm_restarts: int = Field(default=1, ge=1, description="Baum-Welch restarts per temperature")
    offset_noise: PowerLawRunConfig = Field(
        default_factory=lambda: PowerLawRunConfig(alpha=1.94, amp_1hz=1.11e-6),
        description="Offset-charge power-law surrogate, e^2/Hz",
    )
    frequency_noise: PowerLawRunConfig = Field(
        default_factory=lambda: PowerLawRunConfig(alpha=2.06, amp_1hz=7.4e5),
        description="Frequency power-law surrogate, Hz^2/Hz",
    )
    alpha_tolerance: float = Field(default=0.1, gt=0.0, description="Allowed exponent error")
    amplitude_factor: float = Field(default=2.0, gt=1.0, description="Allowed amplitude ratio")

    @field_validator("temperatures_mk")
    @classmethod
    def validate_temperatures(cls, v: list[float]) -> list[float]:
        """Require at least one positive temperature."""
        if not v:
            raise ValueError("temperatures_mk must not be empty")
        if any(t <= 0 for t in v):
            raise ValueError("Temperatures must be positive")
        return v

    @model_validator(mode="after")
    def validate_rates(self) -> Self:
        """Scrambling alone cannot be faster than the total 10 mK exit rate."""
        if self.scramble_interval_s < self.stable_time_10mk_s:
            raise ValueError("scramble_interval_s must not be shorter than stable_time_10mk_s")
        return self

    def quickened(self) -> Self:
        """Shorten each record 100x and widen the power-law tolerances."""
        return self.model_copy(
            update={
                "quick": True,
                "duration_h": self.duration_h / QUICK_FACTOR,
                "alpha_tolerance": max(self.alpha_tolerance, 0.5),
                "amplitude_factor": max(self.amplitude_factor, 10.0),
            }
        )

    def to_domain(self) -> ChargeEnvConfig:
        """Markov environment, compressed in time when requested."""
        env = ChargeEnvConfig(
            offsets=tuple(self.offsets_e),
            noise_sigma=self.noise_sigma_e,
            neighbor_rate_ref=1.0 / self.stable_time_10mk_s - 1.0 / self.scramble_interval_s,
            reference_temperature=0.010,
            temperature_exponent=self.temperature_exponent,
            scramble_rate=1.0 / self.scramble_interval_s,
            temperatures=tuple(t * 1e-3 for t in self.temperatures_mk),
            sample_interval=self.sample_interval_s,
            duration=self.duration_h * 3600.0,
            neighbor_reach=self.neighbor_reach,
            seed=self.seed,
        )
        if self.time_compression > 1.0:
            env = env.compressed(self.time_compression)
        return env


class FieldsRunConfig(GlobalRunSettings):
    """Electrostatics pipeline settings."""

    cells: int = Field(default=64, ge=8, description="Grid cells per axis (even)")
    spacing_m: float = Field(default=50e-6, gt=0.0, description="Grid spacing")
    surface_fraction: float = Field(
        default=0.625, gt=0.0, lt=1.0, description="Height of the device plane in the box"
    )
    paddle_length_m: float = Field(default=1.0e-3, gt=0.0, description="Paddle length along x")
    paddle_width_m: float = Field(default=0.6e-3, gt=0.0, description="Paddle width along y")
    paddle_gap_m: float = Field(default=0.2e-3, ge=0.0, description="Gap between paddles")
    island_size_m: float = Field(default=0.15e-3, gt=0.0, description="Island edge length")
    island_clearance_m: float = Field(default=50e-6, ge=0.0, description="Island-ground gap")
    island_ground_width_m: float = Field(default=0.3e-3, gt=0.0, description="Ground ring width")
    differential_permittivity: float = Field(default=10.0, ge=1.0, description="Sapphire")
    island_permittivity: float = Field(default=11.7, ge=1.0, description="Silicon")
    thresholds: list[float] = Field(
        default_factory=lambda: [1e-3, 2e-3, 5e-3, 1e-2, 2e-2, 5e-2, 1e-1],
        description="Induced-charge fractions at which the sensitive volume is reported",
    )
    tolerance: float = Field(default=1e-6, gt=0.0, lt=1.0, description="SOR residual target")
    max_iterations: int = Field(default=20_000, ge=10, description="SOR sweep cap")
    reciprocity_check: bool = Field(
        default=True, description="Cross-check one substrate point by a direct solve"
    )

    @field_validator("cells")
    @classmethod
    def validate_cells(cls, v: int) -> int:
        """Node grids need an even cell count."""
        if v % 2:
            raise ValueError("cells must be even")
        return v

    @field_validator("thresholds")
    @classmethod
    def validate_thresholds(cls, v: list[float]) -> list[float]:
        """Require a non-empty list of fractions in (0, 1]."""
        if not v:
            raise ValueError("thresholds must not be empty")
        if any(not 0.0 < t <= 1.0 for t in v):
            raise ValueError("thresholds must lie in (0, 1]")
        return sorted(v)

    def quickened(self) -> Self:
        """Coarsen the grid while keeping the physical box size."""
        if self.cells <= QUICK_FIELD_CELLS:
            return self.model_copy(update={"quick": True})
        return self.model_copy(
            update={
                "quick": True,
                "cells": QUICK_FIELD_CELLS,
                "spacing_m": self.spacing_m * self.cells / QUICK_FIELD_CELLS,
            }
        )

    def to_domain(self, max_grid_points: int) -> GeometryScale:
        """Geometry scale bounded by the process-level grid budget."""
        return GeometryScale(
            cells=self.cells,
            spacing=self.spacing_m,
            surface_fraction=self.surface_fraction,
            paddle_length=self.paddle_length_m,
            paddle_width=self.paddle_width_m,
            paddle_gap=self.paddle_gap_m,
            island_size=self.island_size_m,
            island_clearance=self.island_clearance_m,
            island_ground_width=self.island_ground_width_m,
            differential_permittivity=self.differential_permittivity,
            island_permittivity=self.island_permittivity,
            max_grid_points=max_grid_points,
        )


class ReproduceRunConfig(GlobalRunSettings):
    """Every pipeline at its anchored defaults, run into one directory."""

    spectrum: SpectrumRunConfig = Field(default_factory=SpectrumRunConfig)
    parity: ParityRunConfig = Field(default_factory=ParityRunConfig)
    charge: ChargeRunConfig = Field(default_factory=ChargeRunConfig)
    fields: FieldsRunConfig = Field(default_factory=FieldsRunConfig)

    model_config = {
        "extra": "forbid",
        "json_schema_extra": {
            "examples": [
                {
                    "seed": 7,
                    "parity": {"duration_s": 60.0, "dwell_time_s": 5.9e-3},
                    "charge": {"temperatures_mk": [10, 50, 100, 150]},
                    "fields": {"cells": 64},
                }
            ]
        },
    }

    def quickened(self) -> Self:
        """Apply quick mode to every sub-pipeline."""
        return self.model_copy(
            update={
                "quick": True,
                "spectrum": self.spectrum.quickened(),
                "parity": self.parity.quickened(),
                "charge": self.charge.quickened(),
                "fields": self.fields.quickened(),
            }
        )


def load_run_config(model: type[ConfigT], text: Optional[str]) -> ConfigT:
    """Parse a JSON run document.

    Args:
        model: Target configuration class.
        text: JSON text; None or blank selects every default.

    Returns:
        The validated configuration.

    Raises:
        ConfigurationError: Naming the dotted path of the first invalid field.
    """
    try:
        if text is None or not text.strip():
            return model()
        return model.model_validate_json(text)
    except ValidationError as e:
        first = e.errors()[0]
        path = ".".join(str(part) for part in first["loc"]) or "<document>"
        raise ConfigurationError(first["msg"], field=path) from e
