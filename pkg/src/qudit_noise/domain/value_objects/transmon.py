"""Transmon spectrum value objects."""

import logging
import math
from dataclasses import dataclass, field
from typing_extensions import Self

import numpy as np
from numpy.typing import NDArray

logger = logging.getLogger(__name__)

# Ratio below which the device is no longer in the transmon regime.
TRANSMON_REGIME_RATIO = 10.0

# Quoted device parameters, GHz.
DEVICE_E_J_GHZ = 6.3366
DEVICE_E_C_GHZ = 0.2083
DEVICE_F01_GHZ = 3.4578
DEVICE_MAX_DISPERSION_12_GHZ = 120e-6


def fold_offset(q: float | NDArray[np.float64]) -> NDArray[np.float64]:
    """Fold an offset charge in electron units into [0, 0.5].

    The transmon spectrum is periodic in q with period 1 e (a quasiparticle
    tunneling event) and even about q = 0, so every offset maps onto the
    half-period [0, 0.5] e.
    """
    wrapped = np.mod(np.asarray(q, dtype=np.float64), 1.0)
    return np.where(wrapped > 0.5, 1.0 - wrapped, wrapped)


def offset_to_gate_charge(q: float | NDArray[np.float64]) -> NDArray[np.float64]:
    """Convert offset charge in e to gate charge in Cooper-pair units."""
    return np.asarray(q, dtype=np.float64) / 2.0


def gate_charge_to_offset(n_g: float | NDArray[np.float64]) -> NDArray[np.float64]:
    """Convert gate charge in Cooper-pair units to a folded offset in e."""
    return fold_offset(2.0 * np.asarray(n_g, dtype=np.float64))


@dataclass(frozen=True)
class TransmonParams:
    """Josephson and charging energies of a transmon, in GHz (E / h).

    ``e_j = 0`` is accepted and describes the charging-only limit.
    """

    e_j: float
    e_c: float

    def __post_init__(self) -> None:
        """Validate energies after initialization."""
        if not (math.isfinite(self.e_j) and math.isfinite(self.e_c)):
            raise ValueError("Transmon energies must be finite")
        if self.e_j < 0:
            raise ValueError("e_j cannot be negative")
        if self.e_c <= 0:
            raise ValueError("e_c must be positive")
        if not self.in_transmon_regime:
            logger.warning(
                f"e_j/e_c = {self.ratio:.3g} is below the transmon regime ({TRANSMON_REGIME_RATIO})"
            )

    @classmethod
    def device(cls) -> Self:
        """Create parameters for the characterised device (6.3366 GHz, 208.3 MHz)."""
        return cls(e_j=DEVICE_E_J_GHZ, e_c=DEVICE_E_C_GHZ)

    @classmethod
    def from_ratio(cls, ratio: float, e_c: float = DEVICE_E_C_GHZ) -> Self:
        """Create parameters with a given e_j/e_c ratio.

        Args:
            ratio: Target e_j / e_c.
            e_c: Charging energy in GHz.

        Returns:
            New TransmonParams.
        """
        return cls(e_j=ratio * e_c, e_c=e_c)

    @property
    def ratio(self) -> float:
        """The e_j / e_c ratio."""
        return self.e_j / self.e_c

    @property
    def in_transmon_regime(self) -> bool:
        """Whether e_j / e_c is at least 10."""
        return self.ratio >= TRANSMON_REGIME_RATIO

    @property
    def plasma_estimate_ghz(self) -> float:
        """Asymptotic f_01 estimate sqrt(8 e_j e_c) - e_c."""
        return math.sqrt(8.0 * self.e_j * self.e_c) - self.e_c


@dataclass(frozen=True, eq=False)
class TridiagonalMatrix:
    """Symmetric tridiagonal matrix stored as diagonal and off-diagonal bands."""

    diagonal: NDArray[np.float64]
    off_diagonal: NDArray[np.float64]

    def __post_init__(self) -> None:
        """Validate band shapes."""
        if self.diagonal.ndim != 1 or self.off_diagonal.ndim != 1:
            raise ValueError("Bands must be one-dimensional")
        if self.off_diagonal.size != max(self.diagonal.size - 1, 0):
            raise ValueError("Off-diagonal must have one element fewer than the diagonal")

    @property
    def dimension(self) -> int:
        """Matrix dimension."""
        return int(self.diagonal.size)

    def to_dense(self) -> NDArray[np.float64]:
        """Return the dense symmetric matrix."""
        return (
            np.diag(self.diagonal)
            + np.diag(self.off_diagonal, k=1)
            + np.diag(self.off_diagonal, k=-1)
        )

    @classmethod
    def from_dense(cls, matrix: NDArray[np.float64], atol: float = 1e-12) -> Self:
        """Build from a dense matrix, checking symmetry and tridiagonal structure.

        Args:
            matrix: Square matrix.
            atol: Absolute tolerance for structural checks.

        Returns:
            A new TridiagonalMatrix.

        Raises:
            ValueError: If the matrix is not symmetric tridiagonal.
        """
        dense = np.asarray(matrix, dtype=np.float64)
        if dense.ndim != 2 or dense.shape[0] != dense.shape[1]:
            raise ValueError("Matrix must be square")
        if not np.allclose(dense, dense.T, atol=atol, rtol=0.0):
            raise ValueError("Matrix must be symmetric")
        band = np.abs(np.subtract.outer(np.arange(dense.shape[0]), np.arange(dense.shape[0]))) > 1
        if np.any(np.abs(dense[band]) > atol):
            raise ValueError("Matrix must be tridiagonal")
        return cls(diagonal=np.diag(dense).copy(), off_diagonal=np.diag(dense, k=1).copy())


@dataclass(frozen=True, eq=False)
class SpectrumTable:
    """Eigenvalues over a gate-charge grid.

    ``levels[g, l]`` is E_l at ``n_g_grid[g]`` in GHz.
    """

    n_g_grid: NDArray[np.float64]
    levels: NDArray[np.float64]
    n_cut: int
    params: TransmonParams
    convergence_delta_ghz: float = 0.0
    converged: bool = True

    def __post_init__(self) -> None:
        """Validate table shape and ordering."""
        if self.levels.ndim != 2 or self.levels.shape[0] != self.n_g_grid.size:
            raise ValueError("levels must have one row per grid point")
        if np.any(np.diff(self.levels, axis=1) < 0):
            raise ValueError("Eigenvalues must be sorted ascending")

    @property
    def max_level(self) -> int:
        """Highest retained level index."""
        return int(self.levels.shape[1] - 1)

    def transition(self, i: int, j: int) -> NDArray[np.float64]:
        """Transition frequency E_j - E_i over the grid, GHz."""
        return self.levels[:, j] - self.levels[:, i]

    def index_of(self, n_g: float, atol: float = 1e-12) -> int:
        """Return the grid index of a gate charge.

        Raises:
            KeyError: If the grid does not contain ``n_g``.
        """
        hits = np.flatnonzero(np.abs(self.n_g_grid - n_g) <= atol)
        if hits.size == 0:
            raise KeyError(n_g)
        return int(hits[0])

    def to_dict(self) -> dict[str, object]:
        """Serialize to a JSON-compatible dictionary."""
        return {
            "e_j_ghz": self.params.e_j,
            "e_c_ghz": self.params.e_c,
            "n_cut": self.n_cut,
            "n_g_grid": self.n_g_grid.tolist(),
            "levels_ghz": self.levels.tolist(),
            "convergence_delta_ghz": self.convergence_delta_ghz,
            "converged": self.converged,
        }


@dataclass(frozen=True)
class ParityBands:
    """Mean transition frequency and charge dispersion of one transition.

    The two parity bands are f_bar +/- eps * cos(2 pi n_g). ``photons`` is the
    number of drive photons: 2 for the two-photon 1-3 line, whose resonance
    sits at half the level spacing.
    """

    i: int
    j: int
    f_bar_ghz: float
    eps_ghz: float
    cosine_residual_ghz: float = 0.0
    photons: int = 1

    def __post_init__(self) -> None:
        """Validate level ordering and sign convention."""
        if self.i < 0 or self.j <= self.i:
            raise ValueError("Level indices must satisfy 0 <= i < j")
        if self.eps_ghz < 0:
            raise ValueError("eps is reported as a non-negative amplitude")
        if self.photons < 1:
            raise ValueError("photons must be at least 1")

    @property
    def max_splitting_ghz(self) -> float:
        """Largest band splitting 2 * eps."""
        return 2.0 * self.eps_ghz

    def band_frequencies(self, q: float | NDArray[np.float64]) -> tuple[
        NDArray[np.float64], NDArray[np.float64]
    ]:
        """Return the (plus, minus) band frequencies at offset charge q (e units).

        Args:
            q: Offset charge in e.

        Returns:
            Tuple of frequencies in GHz.
        """
        shift = self.eps_ghz * np.cos(np.pi * np.asarray(q, dtype=np.float64))
        return self.f_bar_ghz + shift, self.f_bar_ghz - shift

    def to_dict(self) -> dict[str, float | int]:
        """Serialize to a JSON-compatible dictionary."""
        return {
            "i": self.i,
            "j": self.j,
            "photons": self.photons,
            "f_bar_ghz": self.f_bar_ghz,
            "eps_ghz": self.eps_ghz,
            "cosine_residual_ghz": self.cosine_residual_ghz,
        }


@dataclass(frozen=True)
class OffsetInversion:
    """Offset charges recovered from band splittings."""

    q: NDArray[np.float64] = field(repr=False)
    clamped: int = 0


@dataclass(frozen=True)
class ChargeDispersionReport:
    """Exact-diagonalization record compared with the quoted device anchors."""

    f01_ghz: float
    f01_variation_khz: float
    dispersion_12_khz: float
    quoted_f01_ghz: float = DEVICE_F01_GHZ
    quoted_dispersion_12_khz: float = DEVICE_MAX_DISPERSION_12_GHZ * 1e6
    insensitive_threshold_khz: float = 1.0

    @property
    def f01_deviation_ghz(self) -> float:
        """Computed minus quoted f_01."""
        return self.f01_ghz - self.quoted_f01_ghz

    @property
    def f01_charge_insensitive(self) -> bool:
        """Whether f_01 varies by less than the insensitivity threshold."""
        return self.f01_variation_khz < self.insensitive_threshold_khz

    @property
    def dispersion_matches_quote(self) -> bool:
        """Whether the 1-2 dispersion lies within 10% of the quoted value."""
        return abs(self.dispersion_12_khz - self.quoted_dispersion_12_khz) <= (
            0.1 * self.quoted_dispersion_12_khz
        )

    def to_dict(self) -> dict[str, float | bool]:
        """Serialize to a JSON-compatible dictionary."""
        return {
            "f01_ghz": self.f01_ghz,
            "quoted_f01_ghz": self.quoted_f01_ghz,
            "f01_deviation_ghz": self.f01_deviation_ghz,
            "f01_variation_khz": self.f01_variation_khz,
            "f01_charge_insensitive": self.f01_charge_insensitive,
            "dispersion_12_khz": self.dispersion_12_khz,
            "quoted_dispersion_12_khz": self.quoted_dispersion_12_khz,
            "dispersion_matches_quote": self.dispersion_matches_quote,
        }


@dataclass(frozen=True, eq=False)
class OffsetCorrelation:
    """Time-matched offset pairs from two traces and their Pearson correlation."""

    q_a: NDArray[np.float64]
    q_b: NDArray[np.float64]
    coefficient: float

    @property
    def n_pairs(self) -> int:
        """Number of matched pairs."""
        return int(self.q_a.size)
