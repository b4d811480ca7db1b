"""Transmon spectrum service: charge-basis diagonalization and parity bands."""

import logging
import math
from typing import Optional

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.linalg import LinAlgError, eigvalsh_tridiagonal
from scipy.stats import pearsonr

from qudit_noise.domain.exceptions import DataError, EigensolverError, NoInversionError
from qudit_noise.domain.value_objects.processes import ChargeTrace
from qudit_noise.domain.value_objects.transmon import (
    ChargeDispersionReport,
    OffsetCorrelation,
    OffsetInversion,
    ParityBands,
    SpectrumTable,
    TransmonParams,
    TridiagonalMatrix,
    fold_offset,
)

logger = logging.getLogger(__name__)

MIN_N_CUT = 5
CHARGE_INSENSITIVE_GHZ = 1e-6


class SpectrumService:
    """Exact diagonalization of the transmon in the charge basis.

    H = 4 e_c (n - n_g)^2 - (e_j / 2) sum_n (|n><n+1| + h.c.), truncated to
    n = -n_cut ... n_cut. Every scan is repeated at n_cut + convergence_step
    and the largest eigenvalue change is recorded on the table.
    """

    def __init__(
        self,
        n_cut: int = 15,
        convergence_step: int = 5,
        convergence_tolerance_ghz: float = CHARGE_INSENSITIVE_GHZ,
    ) -> None:
        """Initialize the service.

        Args:
            n_cut: Default charge-basis truncation.
            convergence_step: Truncation increase used by the convergence check.
            convergence_tolerance_ghz: Largest accepted eigenvalue change.
        """
        if n_cut < MIN_N_CUT:
            raise ValueError(f"n_cut must be at least {MIN_N_CUT}")
        self.n_cut = n_cut
        self.convergence_step = convergence_step
        self.convergence_tolerance_ghz = convergence_tolerance_ghz

    def build_hamiltonian(
        self, params: TransmonParams, n_g: float, n_cut: Optional[int] = None
    ) -> TridiagonalMatrix:
        """Build the charge-basis Hamiltonian.

        Args:
            params: Transmon energies.
            n_g: Gate charge in Cooper-pair units.
            n_cut: Truncation; defaults to the service setting.

        Returns:
            Symmetric tridiagonal matrix of dimension 2 n_cut + 1, in GHz.

        Raises:
            DataError: If n_g is not finite or n_cut < 5.
        """
        n_cut = self.n_cut if n_cut is None else n_cut
        if n_cut < MIN_N_CUT:
            raise DataError(f"n_cut must be at least {MIN_N_CUT}, got {n_cut}")
        if not math.isfinite(n_g):
            raise DataError(f"Gate charge must be finite, got {n_g}")
        charges = np.arange(-n_cut, n_cut + 1, dtype=np.float64)
        diagonal = 4.0 * params.e_c * (charges - n_g) ** 2
        off_diagonal = np.full(2 * n_cut, -params.e_j / 2.0)
        return TridiagonalMatrix(diagonal=diagonal, off_diagonal=off_diagonal)

    @staticmethod
    def eigenvalues(
        matrix: TridiagonalMatrix | NDArray[np.float64], count: int
    ) -> NDArray[np.float64]:
        """Return the ``count`` lowest eigenvalues in ascending order.

        Args:
            matrix: Tridiagonal matrix, or a dense symmetric tridiagonal array.
            count: Number of eigenvalues.

        Returns:
            Ascending eigenvalues.

        Raises:
            DataError: If the matrix is not symmetric tridiagonal or count is invalid.
            EigensolverError: If LAPACK does not converge.
        """
        if not isinstance(matrix, TridiagonalMatrix):
            try:
                matrix = TridiagonalMatrix.from_dense(np.asarray(matrix, dtype=np.float64))
            except ValueError as e:
                raise DataError(str(e)) from e
        if not 1 <= count <= matrix.dimension:
            raise DataError(f"count must lie in [1, {matrix.dimension}], got {count}")
        if not (np.all(np.isfinite(matrix.diagonal)) and np.all(np.isfinite(matrix.off_diagonal))):
            raise DataError("Matrix entries must be finite")
        try:
            values = eigvalsh_tridiagonal(
                matrix.diagonal,
                matrix.off_diagonal,
                select="i",
                select_range=(0, count - 1),
            )
        except LinAlgError as e:
            raise EigensolverError(f"Tridiagonal eigensolver did not converge: {e}") from e
        return np.sort(values)

    def _levels(
        self, params: TransmonParams, n_g: float, count: int, n_cut: int
    ) -> NDArray[np.float64]:
        try:
            return self.eigenvalues(self.build_hamiltonian(params, n_g, n_cut), count)
        except EigensolverError as e:
            raise EigensolverError(e.message, n_g=n_g) from e

    def spectrum_scan(
        self,
        params: TransmonParams,
        n_g_grid: ArrayLike,
        max_level: int = 3,
        n_cut: Optional[int] = None,
    ) -> SpectrumTable:
        """Compute levels 0..max_level over a gate-charge grid.

        Args:
            params: Transmon energies.
            n_g_grid: Gate charges in [0, 1].
            max_level: Highest level to keep.
            n_cut: Truncation; defaults to the service setting.

        Returns:
            A SpectrumTable carrying the n_cut convergence check.

        Raises:
            DataError: If the grid or level count is invalid.
            EigensolverError: If diagonalization fails at a grid point.
        """
        n_cut = self.n_cut if n_cut is None else n_cut
        grid = np.asarray(n_g_grid, dtype=np.float64).ravel()
        if grid.size == 0 or np.any(grid < 0) or np.any(grid > 1):
            raise DataError("Gate-charge grid values must lie in [0, 1]")
        if max_level < 0 or max_level + 3 > 2 * n_cut + 1:
            raise DataError(f"max_level={max_level} is too large for n_cut={n_cut}")

        count = max_level + 1
        levels = np.array([self._levels(params, float(n_g), count, n_cut) for n_g in grid])
        wider = np.array(
            [self._levels(params, float(n_g), count, n_cut + self.convergence_step) for n_g in grid]
        )
        delta = float(np.max(np.abs(wider - levels)))
        converged = delta < self.convergence_tolerance_ghz
        if not converged:
            logger.warning(
                f"n_cut={n_cut} not converged: eigenvalues moved by {delta * 1e6:.3g} kHz "
                f"at n_cut={n_cut + self.convergence_step}"
            )
        logger.debug(f"Scanned {grid.size} gate charges, levels 0..{max_level}, n_cut={n_cut}")
        return SpectrumTable(
            n_g_grid=grid,
            levels=levels,
            n_cut=n_cut,
            params=params,
            convergence_delta_ghz=delta,
            converged=converged,
        )

    def parity_bands(self, table: SpectrumTable, i: int, j: int, photons: int = 1) -> ParityBands:
        """Extract mean frequency and dispersion of the i -> j transition.

        Args:
            table: Spectrum covering n_g = 0, 0.25 and 0.5.
            i: Lower level.
            j: Upper level.
            photons: Drive photon number; the line sits at (E_j - E_i) / photons.

        Returns:
            ParityBands with eps >= 0 and the cosine-model residual.

        Raises:
            DataError: If levels are out of order or the grid misses anchor points.
        """
        if i < 0 or j <= i:
            raise DataError(f"Transition requires 0 <= i < j, got ({i}, {j})")
        if j > table.max_level:
            raise DataError(f"Level {j} is beyond the table (max {table.max_level})")
        try:
            g0, g_quarter, g_half = (table.index_of(x) for x in (0.0, 0.25, 0.5))
        except KeyError as e:
            raise DataError(f"Spectrum table must contain n_g = {e.args[0]}") from e

        f = table.transition(i, j) / photons
        f_bar = 0.5 * (f[g0] + f[g_half])
        eps_signed = 0.5 * (f[g0] - f[g_half])
        model = f_bar + eps_signed * np.cos(2.0 * np.pi * table.n_g_grid)
        residual = float(np.max(np.abs(f - model)))
        logger.debug(
            f"Bands {i}-{j} ({photons} photon): f_bar={f_bar:.6f} GHz, "
            f"eps={abs(eps_signed) * 1e6:.3f} kHz, quarter-point f={f[g_quarter]:.6f} GHz"
        )
        return ParityBands(
            i=i,
            j=j,
            f_bar_ghz=float(f_bar),
            eps_ghz=float(abs(eps_signed)),
            cosine_residual_ghz=residual,
            photons=photons,
        )

    @staticmethod
    def splitting_from_offset(q: ArrayLike, bands: ParityBands) -> NDArray[np.float64]:
        """Band splitting f+ - f- = 2 eps cos(pi q) at offset charge q (e units), GHz."""
        return 2.0 * bands.eps_ghz * np.cos(np.pi * np.asarray(q, dtype=np.float64))

    @staticmethod
    def offset_from_splitting(delta_f: ArrayLike, bands: ParityBands) -> OffsetInversion:
        """Invert band splittings to folded offset charges.

        Args:
            delta_f: Splitting(s) f+ - f- in GHz.
            bands: Parity bands of the probed transition.

        Returns:
            Offsets in [0, 0.5] e plus the number of clamped ratios.

        Raises:
            NoInversionError: If the dispersion is zero.
        """
        if bands.eps_ghz == 0:
            raise NoInversionError(f"Transition {bands.i}-{bands.j} has zero charge dispersion")
        ratio = np.asarray(delta_f, dtype=np.float64) / (2.0 * bands.eps_ghz)
        clamped = int(np.count_nonzero(np.abs(ratio) > 1.0))
        if clamped:
            logger.warning(f"Clamped {clamped} splitting ratios outside [-1, 1]")
        q = fold_offset(np.arccos(np.clip(ratio, -1.0, 1.0)) / np.pi)
        return OffsetInversion(q=q, clamped=clamped)

    @staticmethod
    def correlate_offsets(
        trace_a: ChargeTrace, trace_b: ChargeTrace, window: float = 1.0
    ) -> OffsetCorrelation:
        """Pair two offset traces by nearest timestamp and correlate them.

        Args:
            trace_a: First trace.
            trace_b: Second trace.
            window: Largest accepted timestamp difference, seconds.

        Returns:
            Matched pairs and their Pearson coefficient.

        Raises:
            DataError: If no samples overlap or a side has zero variance.
        """
        if len(trace_a) == 0 or len(trace_b) == 0:
            raise DataError("Cannot correlate an empty trace")
        right = np.clip(np.searchsorted(trace_b.times, trace_a.times), 0, len(trace_b) - 1)
        left = np.clip(right - 1, 0, len(trace_b) - 1)
        pick_left = np.abs(trace_b.times[left] - trace_a.times) <= np.abs(
            trace_b.times[right] - trace_a.times
        )
        nearest = np.where(pick_left, left, right)
        keep = np.abs(trace_b.times[nearest] - trace_a.times) <= window
        if np.count_nonzero(keep) < 2:
            raise DataError(f"Traces share fewer than two samples within {window} s")
        q_a = trace_a.q[keep]
        q_b = trace_b.q[nearest[keep]]
        if np.ptp(q_a) == 0 or np.ptp(q_b) == 0:
            raise DataError("Correlation undefined for a constant trace")
        coefficient = float(pearsonr(q_a, q_b)[0])
        return OffsetCorrelation(q_a=q_a, q_b=q_b, coefficient=float(np.clip(coefficient, -1, 1)))

    @staticmethod
    def anharmonicity(table: SpectrumTable) -> float:
        """Mean f_12 - f_01 over the grid, GHz."""
        return float(np.mean(table.transition(1, 2) - table.transition(0, 1)))

    def charge_dispersion_report(
        self, params: Optional[TransmonParams] = None, grid_points: int = 41
    ) -> ChargeDispersionReport:
        """Record f_01 and the 1-2 dispersion against the quoted device anchors.

        Args:
            params: Transmon energies; defaults to the characterised device.
            grid_points: Points on the [0, 0.5] gate-charge grid.

        Returns:
            A ChargeDispersionReport.
        """
        params = params or TransmonParams.device()
        grid = np.linspace(0.0, 0.5, grid_points)
        table = self.spectrum_scan(params, grid, max_level=3)
        f01 = table.transition(0, 1)
        bands_12 = self.parity_bands(table, 1, 2)
        report = ChargeDispersionReport(
            f01_ghz=float(self.parity_bands(table, 0, 1).f_bar_ghz),
            f01_variation_khz=float(np.ptp(f01) * 1e6),
            dispersion_12_khz=bands_12.max_splitting_ghz * 1e6,
        )
        if not report.dispersion_matches_quote or abs(report.f01_deviation_ghz) > 1e-3:
            logger.warning(
                f"Exact diagonalization gives f01={report.f01_ghz:.4f} GHz and "
                f"2*eps_12={report.dispersion_12_khz:.1f} kHz; quoted values are "
                f"{report.quoted_f01_ghz} GHz and {report.quoted_dispersion_12_khz:.0f} kHz"
            )
        return report

    def frequency_trace_from_offsets(
        self,
        trace: ChargeTrace,
        bands: ParityBands,
        noise_ghz: float,
        rng: np.random.Generator,
    ) -> NDArray[np.float64]:
        """Band splittings a spectroscopy tracker would report for an offset trace."""
        splitting = self.splitting_from_offset(trace.q, bands)
        return splitting + rng.normal(0.0, noise_ghz, size=splitting.shape)

    def offsets_from_frequency_trace(
        self,
        times: NDArray[np.float64],
        delta_f: NDArray[np.float64],
        bands: ParityBands,
        temperature: float,
    ) -> ChargeTrace:
        """Convert a splitting trace back into a folded offset-charge trace."""
        inversion = self.offset_from_splitting(delta_f, bands)
        return ChargeTrace(times=times, q=inversion.q, temperature=temperature)
