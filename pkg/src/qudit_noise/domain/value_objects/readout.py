"""Single-shot readout value objects."""

from dataclasses import dataclass
from enum import Enum
from typing import Iterator, Optional
from typing_extensions import Self

import numpy as np
from numpy.typing import NDArray

N_QUDIT_STATES = 4


class TargetBand(str, Enum):
    """Parity band driven by a probe pulse."""

    EVEN = "even"
    ODD = "odd"

    @property
    def parity(self) -> int:
        """Parity index matched by this band (0 even, 1 odd)."""
        return 0 if self is TargetBand.EVEN else 1

    @classmethod
    def from_parity(cls, parity: int) -> "TargetBand":
        """Return the band matching a parity index."""
        return cls.EVEN if parity == 0 else cls.ODD


class ResetPulse(str, Enum):
    """Conditional pulse sequence chosen by the active-reset controller."""

    NONE = "none"
    PI01 = "pi01"
    PI12_PI01 = "pi12+pi01"

    def apply(self, state: int) -> int:
        """Return the qudit state after applying this pulse sequence."""
        if self is ResetPulse.NONE:
            return state
        if self is ResetPulse.PI01:
            return {0: 1, 1: 0}.get(state, state)
        after_12 = {1: 2, 2: 1}.get(state, state)
        return {0: 1, 1: 0}.get(after_12, after_12)


@dataclass(frozen=True)
class ShotRecord:
    """One demodulated single-shot measurement."""

    t: float
    i_volt: float
    q_volt: float
    target_band: TargetBand
    truth_state: Optional[int] = None


@dataclass(frozen=True, eq=False)
class ShotTable:
    """Columnar collection of shots from one run.

    ``band`` holds parity indices (0 even, 1 odd); ``truth_state`` is -1 when
    unknown.
    """

    t: NDArray[np.float64]
    i_volt: NDArray[np.float64]
    q_volt: NDArray[np.float64]
    band: NDArray[np.int64]
    truth_state: NDArray[np.int64]

    def __post_init__(self) -> None:
        """Validate column lengths and timestamp ordering."""
        n = self.t.size
        for column in (self.i_volt, self.q_volt, self.band, self.truth_state):
            if column.size != n:
                raise ValueError("All shot columns must have the same length")
        if n > 1 and np.any(np.diff(self.t) <= 0):
            raise ValueError("Shot timestamps must be strictly increasing")

    def __len__(self) -> int:
        """Return the number of shots."""
        return int(self.t.size)

    def __iter__(self) -> Iterator[ShotRecord]:
        """Iterate over shots as records."""
        for k in range(len(self)):
            yield self.record(k)

    def record(self, k: int) -> ShotRecord:
        """Return shot ``k`` as a ShotRecord."""
        truth = int(self.truth_state[k])
        return ShotRecord(
            t=float(self.t[k]),
            i_volt=float(self.i_volt[k]),
            q_volt=float(self.q_volt[k]),
            target_band=TargetBand.from_parity(int(self.band[k])),
            truth_state=truth if truth >= 0 else None,
        )

    @property
    def iq(self) -> NDArray[np.float64]:
        """Shots as an (n, 2) array of (I, Q)."""
        return np.column_stack([self.i_volt, self.q_volt])

    def select_band(self, band: TargetBand) -> Self:
        """Return the sub-table probing one band."""
        mask = self.band == band.parity
        return type(self)(
            t=self.t[mask],
            i_volt=self.i_volt[mask],
            q_volt=self.q_volt[mask],
            band=self.band[mask],
            truth_state=self.truth_state[mask],
        )


@dataclass(frozen=True, eq=False)
class IqClusterModel:
    """Gaussian IQ clusters per qudit state plus a state-assignment error matrix.

    ``error_matrix[s, s']`` is the probability that true state s is read out
    from the cluster of s'; it folds in-readout relaxation (2 -> 1) into one
    row-stochastic matrix. Covariances may be singular (noiseless limit).
    """

    means: NDArray[np.float64]
    covariances: NDArray[np.float64]
    error_matrix: NDArray[np.float64]

    def __post_init__(self) -> None:
        """Validate shapes, covariance and stochasticity."""
        n = self.means.shape[0]
        if self.means.shape != (n, 2) or self.covariances.shape != (n, 2, 2):
            raise ValueError("means must be (n, 2) and covariances (n, 2, 2)")
        if self.error_matrix.shape != (n, n):
            raise ValueError("error_matrix must be (n, n)")
        if not np.allclose(self.covariances, np.transpose(self.covariances, (0, 2, 1))):
            raise ValueError("Covariances must be symmetric")
        if np.any(np.linalg.eigvalsh(self.covariances) < -1e-15):
            raise ValueError("Covariances must be positive semidefinite")
        if np.any(self.error_matrix < 0) or not np.allclose(self.error_matrix.sum(axis=1), 1.0):
            raise ValueError("error_matrix must be row-stochastic")

    @property
    def n_states(self) -> int:
        """Number of modeled qudit states."""
        return int(self.means.shape[0])

    @classmethod
    def default(
        cls,
        separation: float = 0.1,
        sigma: float = 0.02,
        relaxation_21: float = 0.05,
    ) -> Self:
        """Create four isotropic clusters on the corners of a square.

        States 0, 1, 2, 3 sit at (0, 0), (d, 0), (d, d), (0, d); with d = 5 sigma
        each cluster spills about 1.2% of its shots over its two nearest edges.

        Args:
            separation: Corner spacing d in volts.
            sigma: Per-quadrature standard deviation in volts.
            relaxation_21: Probability that state 2 relaxes to 1 during readout.

        Returns:
            A new IqClusterModel.
        """
        means = separation * np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
        covariances = np.tile(np.eye(2) * sigma**2, (N_QUDIT_STATES, 1, 1))
        return cls(
            means=means,
            covariances=covariances,
            error_matrix=cls.relaxation_matrix(relaxation_21),
        )

    @classmethod
    def noiseless(cls, separation: float = 0.1) -> Self:
        """Create zero-covariance clusters with an identity error matrix."""
        base = cls.default(separation=separation, sigma=0.0, relaxation_21=0.0)
        return cls(
            means=base.means,
            covariances=np.zeros((N_QUDIT_STATES, 2, 2)),
            error_matrix=np.eye(N_QUDIT_STATES),
        )

    @staticmethod
    def relaxation_matrix(relaxation_21: float) -> NDArray[np.float64]:
        """Build an error matrix with 2 -> 1 and 3 -> 2 relaxation weights."""
        if not 0.0 <= relaxation_21 <= 1.0:
            raise ValueError("relaxation_21 must be a probability")
        matrix = np.eye(N_QUDIT_STATES)
        for upper in (2, 3):
            matrix[upper, upper] = 1.0 - relaxation_21
            matrix[upper, upper - 1] = relaxation_21
        return matrix


@dataclass(frozen=True)
class ResetBoundaries:
    """Quadrant thresholds partitioning the IQ plane into four state regions.

    ``regions`` maps quadrants (low I/low Q, high I/low Q, high I/high Q,
    low I/high Q) to qudit states.
    """

    i_threshold: float
    q_threshold: float
    regions: tuple[int, int, int, int] = (0, 1, 2, 3)

    def __post_init__(self) -> None:
        """Validate that every state labels exactly one region."""
        if sorted(self.regions) != list(range(N_QUDIT_STATES)):
            raise ValueError("regions must label each of the four states once")

    @classmethod
    def from_cluster_model(cls, model: IqClusterModel) -> Self:
        """Place thresholds halfway between the default square cluster layout."""
        centre = model.means.mean(axis=0)
        return cls(i_threshold=float(centre[0]), q_threshold=float(centre[1]))

    def classify(self, i_volt: float, q_volt: float) -> int:
        """Return the state region of a point; boundary points take the lower state."""
        i_sides = [False, True] if i_volt == self.i_threshold else [i_volt > self.i_threshold]
        q_sides = [False, True] if q_volt == self.q_threshold else [q_volt > self.q_threshold]
        quadrant = {(False, False): 0, (True, False): 1, (True, True): 2, (False, True): 3}
        return min(self.regions[quadrant[(hi_i, hi_q)]] for hi_i in i_sides for hi_q in q_sides)
