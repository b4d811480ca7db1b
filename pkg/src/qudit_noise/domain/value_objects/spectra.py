"""Power-spectral-density value objects."""

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from numpy.typing import NDArray


class PsdMethod(str, Enum):
    """PSD estimator."""

    PERIODOGRAM = "periodogram"
    SEGMENT_AVERAGED = "segment-averaged"


@dataclass(frozen=True)
class SegmentConfig:
    """Segment averaging settings for the PSD estimator.

    ``nperseg`` of None uses the whole record (a single segment).
    """

    method: PsdMethod = PsdMethod.SEGMENT_AVERAGED
    nperseg: int | None = 4096
    overlap: float = 0.5
    window: str = "hann"

    def __post_init__(self) -> None:
        """Validate segmenting parameters."""
        if self.nperseg is not None and self.nperseg < 16:
            raise ValueError("nperseg must be at least 16")
        if not 0.0 <= self.overlap < 1.0:
            raise ValueError("overlap must lie in [0, 1)")

    @classmethod
    def periodogram(cls) -> "SegmentConfig":
        """Single boxcar segment over the whole record."""
        return cls(method=PsdMethod.PERIODOGRAM, nperseg=None, overlap=0.0, window="boxcar")


@dataclass(frozen=True, eq=False)
class PsdEstimate:
    """One-sided PSD without the DC bin, normalized to integrate to the variance."""

    frequencies: NDArray[np.float64]
    values: NDArray[np.float64]
    method: PsdMethod
    segments: int = 1

    def __post_init__(self) -> None:
        """Validate shapes and positivity."""
        if self.frequencies.shape != self.values.shape:
            raise ValueError("frequencies and values must have the same shape")
        if np.any(self.values < 0):
            raise ValueError("PSD values must be non-negative")
        if np.any(self.frequencies <= 0):
            raise ValueError("PSD excludes the DC bin")

    @property
    def resolution(self) -> float:
        """Bin spacing in Hz."""
        if self.frequencies.size < 2:
            return 0.0
        return float(self.frequencies[1] - self.frequencies[0])

    def integrated_power(self) -> float:
        """Sum(PSD) * df."""
        return float(self.values.sum() * self.resolution)

    def restricted(self, f_min: float, f_max: float) -> "PsdEstimate":
        """Return the bins with f_min <= f <= f_max."""
        mask = (self.frequencies >= f_min) & (self.frequencies <= f_max)
        return PsdEstimate(self.frequencies[mask], self.values[mask], self.method, self.segments)


@dataclass(frozen=True, eq=False)
class LorentzianFit:
    """S(f) = A / (1 + (f / f_c)^2) + B with parameter covariance (A, f_c, B)."""

    amplitude: float
    knee_hz: float
    floor: float
    covariance: NDArray[np.float64]
    residual_rms: float = 0.0
    fit_range: tuple[float, float] = (0.0, math.inf)

    def __post_init__(self) -> None:
        """Validate parameter signs."""
        if self.amplitude <= 0 or self.knee_hz <= 0 or self.floor < 0:
            raise ValueError("Lorentzian requires A > 0, f_c > 0 and B >= 0")

    def evaluate(self, frequencies: NDArray[np.float64]) -> NDArray[np.float64]:
        """Evaluate the model."""
        return self.amplitude / (1.0 + (frequencies / self.knee_hz) ** 2) + self.floor

    @property
    def parameter_errors(self) -> NDArray[np.float64]:
        """One-sigma parameter uncertainties."""
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))

    def to_dict(self) -> dict[str, object]:
        """Serialize to a JSON-compatible dictionary."""
        return {
            "amplitude": self.amplitude,
            "knee_hz": self.knee_hz,
            "floor": self.floor,
            "covariance": self.covariance.tolist(),
            "residual_rms": self.residual_rms,
            "fit_range_hz": list(self.fit_range),
        }


@dataclass(frozen=True)
class DwellEstimate:
    """Dwell time read off a Lorentzian knee under three conventions."""

    knee_hz: float

    @property
    def knee_reciprocal_s(self) -> float:
        """1 / f_c, the published reading (169 Hz <-> 5.9 ms)."""
        return 1.0 / self.knee_hz

    @property
    def angular_s(self) -> float:
        """1 / (2 pi f_c)."""
        return 1.0 / (2.0 * math.pi * self.knee_hz)

    @property
    def telegraph_dwell_s(self) -> float:
        """Mean dwell of a symmetric telegraph signal, 1 / (pi f_c)."""
        return 1.0 / (math.pi * self.knee_hz)

    def to_dict(self) -> dict[str, float]:
        """Serialize to a JSON-compatible dictionary."""
        return {
            "knee_hz": self.knee_hz,
            "knee_reciprocal_s": self.knee_reciprocal_s,
            "angular_s": self.angular_s,
            "telegraph_dwell_s": self.telegraph_dwell_s,
        }


@dataclass(frozen=True, eq=False)
class PowerLawFit:
    """S(f) = amp_1hz * f^(-alpha), fitted in log-log space."""

    alpha: float
    amp_1hz: float
    fit_range: tuple[float, float]
    residuals: NDArray[np.float64]
    excluded_bins: int = 0

    @property
    def residual_rms(self) -> float:
        """RMS of log10 residuals."""
        return float(np.sqrt(np.mean(self.residuals**2))) if self.residuals.size else 0.0

    def evaluate(self, frequencies: NDArray[np.float64]) -> NDArray[np.float64]:
        """Evaluate the model."""
        return self.amp_1hz * frequencies ** (-self.alpha)

    def to_dict(self) -> dict[str, object]:
        """Serialize to a JSON-compatible dictionary."""
        return {
            "alpha": self.alpha,
            "amp_1hz": self.amp_1hz,
            "fit_range_hz": list(self.fit_range),
            "residual_rms_log10": self.residual_rms,
            "excluded_bins": self.excluded_bins,
        }
