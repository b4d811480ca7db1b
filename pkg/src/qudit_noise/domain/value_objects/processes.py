"""Configuration and trace value objects for synthetic processes."""

import math
from dataclasses import dataclass, field, replace
from typing import Optional
from typing_extensions import Self

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import expm

PARITY_DWELL_S = 5.9e-3
PARITY_DUTY_CYCLE_S = 50e-6
PARITY_DURATION_S = 60.0

STABLE_TIME_10MK_S = 22 * 60.0
SCRAMBLE_INTERVAL_S = 1.6 * 3600.0
CHARGE_RUN_DURATION_S = 70 * 3600.0
DEFAULT_OFFSETS_E = (0.04, 0.095, 0.15, 0.20, 0.265, 0.33, 0.395, 0.455)
DEFAULT_TEMPERATURES_K = (0.010, 0.050, 0.100, 0.150)


@dataclass(frozen=True)
class ParityProcessConfig:
    """Symmetric parity telegraph process sampled by interleaved probe pairs."""

    dwell_time: float = PARITY_DWELL_S
    duty_cycle: float = PARITY_DUTY_CYCLE_S
    duration: float = PARITY_DURATION_S
    seed: int = 0

    def __post_init__(self) -> None:
        """Validate positive time scales."""
        if self.dwell_time <= 0 or self.duration <= 0 or self.duty_cycle <= 0:
            raise ValueError("dwell_time, duty_cycle and duration must be positive")

    @property
    def undersampled(self) -> bool:
        """Whether the duty cycle is not shorter than the dwell time."""
        return self.duty_cycle >= self.dwell_time

    @property
    def n_cycles(self) -> int:
        """Number of complete duty cycles in the run."""
        return int(math.floor(self.duration / self.duty_cycle + 1e-9))

    def with_seed(self, seed: int) -> Self:
        """Return a copy with a different seed."""
        return replace(self, seed=seed)


@dataclass(frozen=True, eq=False)
class ParityPath:
    """Piecewise-constant parity path: 0 even, 1 odd."""

    flip_times: NDArray[np.float64]
    initial_parity: int
    duration: float

    def __post_init__(self) -> None:
        """Validate flip ordering and parity value."""
        if self.initial_parity not in (0, 1):
            raise ValueError("initial_parity must be 0 or 1")
        if self.flip_times.size and (
            np.any(np.diff(self.flip_times) <= 0)
            or self.flip_times[0] <= 0
            or self.flip_times[-1] >= self.duration
        ):
            raise ValueError("flip_times must be increasing inside (0, duration)")

    @property
    def n_flips(self) -> int:
        """Number of parity flips."""
        return int(self.flip_times.size)

    def parity_at(self, times: NDArray[np.float64]) -> NDArray[np.int64]:
        """Return the parity at each time."""
        flips = np.searchsorted(self.flip_times, np.asarray(times), side="right")
        return ((self.initial_parity + flips) % 2).astype(np.int64)

    def dwell_times(self) -> NDArray[np.float64]:
        """Return the interval lengths between consecutive flips (censored ends included)."""
        edges = np.concatenate([[0.0], self.flip_times, [self.duration]])
        return np.diff(edges)


@dataclass(frozen=True)
class ChargeEnvConfig:
    """Markov environment of quasi-stable offset-charge configurations.

    Each configuration leaves at a total rate neighbor_rate(T) + scramble_rate.
    The neighbour part is split evenly over configurations within
    ``neighbor_reach`` index steps, the scramble part over the rest. Offsets
    must be sorted so that index distance means offset distance.
    """

    offsets: tuple[float, ...] = DEFAULT_OFFSETS_E
    noise_sigma: float = 0.004
    neighbor_rate_ref: float = 1.0 / STABLE_TIME_10MK_S - 1.0 / SCRAMBLE_INTERVAL_S
    reference_temperature: float = 0.010
    temperature_exponent: float = 1.0
    scramble_rate: float = 1.0 / SCRAMBLE_INTERVAL_S
    temperatures: tuple[float, ...] = DEFAULT_TEMPERATURES_K
    sample_interval: float = 2.0
    duration: float = CHARGE_RUN_DURATION_S
    neighbor_reach: int = 2
    clip_fraction: float = 0.45
    seed: int = 0

    def __post_init__(self) -> None:
        """Validate offsets, rates and sampling."""
        offsets = np.asarray(self.offsets, dtype=np.float64)
        if offsets.size == 0:
            raise ValueError("At least one configuration offset is required")
        if np.any(offsets < 0) or np.any(offsets > 0.5):
            raise ValueError("Configuration offsets must lie in [0, 0.5] e")
        if np.any(np.diff(offsets) <= 0):
            raise ValueError("Configuration offsets must be strictly increasing")
        if self.neighbor_rate_ref < 0 or self.scramble_rate < 0:
            raise ValueError("Rates cannot be negative")
        if not self.temperatures or any(t <= 0 for t in self.temperatures):
            raise ValueError("Temperatures must be a non-empty list of positive values")
        if self.sample_interval <= 0 or self.duration < self.sample_interval:
            raise ValueError("duration must cover at least one sample interval")
        if self.noise_sigma < 0 or self.neighbor_reach < 1:
            raise ValueError("noise_sigma must be >= 0 and neighbor_reach >= 1")

    @classmethod
    def default(cls) -> Self:
        """Create the default eight-configuration environment."""
        return cls()

    @property
    def n_states(self) -> int:
        """Number of configurations."""
        return len(self.offsets)

    @property
    def n_samples(self) -> int:
        """Samples per temperature."""
        return int(math.floor(self.duration / self.sample_interval + 1e-9))

    @property
    def noise_clip(self) -> float:
        """Half-width at which measurement noise is clipped."""
        if self.n_states < 2:
            return 0.5
        return self.clip_fraction * float(np.min(np.diff(self.offsets)))

    def neighbor_rate(self, temperature: float) -> float:
        """Total neighbour-hop rate (1/s) at a temperature."""
        scale = (temperature / self.reference_temperature) ** self.temperature_exponent
        return self.neighbor_rate_ref * scale

    def rate_matrix(self, temperature: float) -> NDArray[np.float64]:
        """Continuous-time generator Q (rows sum to zero)."""
        n = self.n_states
        distance = np.abs(np.subtract.outer(np.arange(n), np.arange(n)))
        near = (distance > 0) & (distance <= self.neighbor_reach)
        far = distance > self.neighbor_reach
        q = np.zeros((n, n))
        for mask, rate in ((near, self.neighbor_rate(temperature)), (far, self.scramble_rate)):
            counts = mask.sum(axis=1, keepdims=True)
            q += np.where(mask, rate / np.maximum(counts, 1), 0.0)
        q[np.diag_indices(n)] = -q.sum(axis=1)
        return q

    def transition_matrix(self, temperature: float) -> NDArray[np.float64]:
        """Discrete-time transition matrix over one sample interval."""
        matrix = np.clip(expm(self.rate_matrix(temperature) * self.sample_interval), 0.0, None)
        return matrix / matrix.sum(axis=1, keepdims=True)

    def mean_stable_time(self, temperature: float) -> float:
        """Planted mean dwell (s) in any configuration at a temperature."""
        exit_rates = -np.diag(self.rate_matrix(temperature))
        if np.any(exit_rates == 0):
            return math.inf
        return float(np.mean(1.0 / exit_rates))

    def compressed(self, factor: float) -> Self:
        """Shrink the time axis by ``factor`` with rates scaled up to keep transition counts."""
        if factor <= 0:
            raise ValueError("Compression factor must be positive")
        return replace(
            self,
            duration=self.duration / factor,
            neighbor_rate_ref=self.neighbor_rate_ref * factor,
            scramble_rate=self.scramble_rate * factor,
        )

    def with_seed(self, seed: int) -> Self:
        """Return a copy with a different seed."""
        return replace(self, seed=seed)


@dataclass(frozen=True, eq=False)
class ChargeTrace:
    """Folded offset-charge time series at one temperature."""

    times: NDArray[np.float64]
    q: NDArray[np.float64]
    temperature: float
    truth_labels: Optional[NDArray[np.int64]] = None

    def __post_init__(self) -> None:
        """Validate folding, ordering and label length."""
        if self.times.size != self.q.size:
            raise ValueError("times and q must have the same length")
        if self.times.size > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be increasing")
        if np.any(self.q < 0) or np.any(self.q > 0.5):
            raise ValueError("q must be folded into [0, 0.5]")
        if self.truth_labels is not None and self.truth_labels.size != self.q.size:
            raise ValueError("truth_labels must match q in length")

    def __len__(self) -> int:
        """Return the number of samples."""
        return int(self.times.size)

    @property
    def duration(self) -> float:
        """Covered time span in seconds."""
        return float(self.times[-1] - self.times[0]) if len(self) else 0.0


@dataclass(frozen=True, eq=False)
class SpectroscopyTrace:
    """Excited population versus drive frequency."""

    frequencies_ghz: NDArray[np.float64]
    population: NDArray[np.float64]
    pulse_len: float

    @property
    def linewidth_ghz(self) -> float:
        """Lorentzian FWHM 1 / (pi * pulse_len), in GHz."""
        return 1.0 / (math.pi * self.pulse_len) * 1e-9


@dataclass(frozen=True, eq=False)
class RamseyTrace:
    """Ramsey signal versus free-evolution delay."""

    delays: NDArray[np.float64]
    signal: NDArray[np.float64]
    detunings_hz: tuple[float, float] = field(default=(0.0, 0.0))


@dataclass(frozen=True, eq=False)
class RelaxationTrace:
    """Level populations during free energy relaxation from an excited level.

    ``populations[t, l]`` is the occupation of level l at ``times[t]``.
    """

    times: NDArray[np.float64]
    populations: NDArray[np.float64]
    t1: float
