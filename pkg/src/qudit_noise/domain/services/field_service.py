"""Finite-difference electrostatics and reciprocity-based induced charge."""

import logging
import math
from typing import Mapping, Optional, Sequence

import numpy as np
from numpy.typing import NDArray

from qudit_noise.domain.exceptions import DataError, FieldSolverError, GeometryError
from qudit_noise.domain.value_objects.electrostatics import (
    BoundaryCondition,
    GeometryScale,
    GridGeometry,
    InducedChargeMap,
    PotentialField,
    SensitiveVolume,
)

logger = logging.getLogger(__name__)

MIN_AXIS_POINTS = 16
POINT_CHARGE = "point_charge"

FaceCoefficients = tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.float64]]


def _harmonic(a: NDArray[np.float64], b: NDArray[np.float64]) -> NDArray[np.float64]:
    return 2.0 * a * b / (a + b)


class FieldService:
    """Red-black SOR solver on a node grid with harmonic-mean face permittivities.

    Free nodes satisfy sum_f eps_f (phi_nb - phi_i) = -rho_i, where rho is a
    unit point source for Poisson solves and zero for weighting potentials.
    """

    def __init__(
        self,
        tolerance: float = 1e-6,
        max_iterations: int = 20000,
        check_every: int = 10,
        max_grid_points: int = 2_500_000,
    ) -> None:
        """Initialize the solver.

        Args:
            tolerance: Residual max-norm target relative to the excitation.
            max_iterations: Iteration cap before FieldSolverError.
            check_every: Iterations between residual evaluations.
            max_grid_points: Memory bound on the node count.
        """
        self.tolerance = tolerance
        self.max_iterations = max_iterations
        self.check_every = check_every
        self.max_grid_points = max_grid_points

    @staticmethod
    def _faces(permittivity: NDArray[np.float64]) -> FaceCoefficients:
        eps = permittivity
        return (
            _harmonic(eps[:-1, :, :], eps[1:, :, :]),
            _harmonic(eps[:, :-1, :], eps[:, 1:, :]),
            _harmonic(eps[:, :, :-1], eps[:, :, 1:]),
        )

    @staticmethod
    def _neighbour_sum(phi: NDArray[np.float64], faces: FaceCoefficients) -> NDArray[np.float64]:
        cx, cy, cz = faces
        total = np.zeros_like(phi)
        total[:-1, :, :] += cx * phi[1:, :, :]
        total[1:, :, :] += cx * phi[:-1, :, :]
        total[:, :-1, :] += cy * phi[:, 1:, :]
        total[:, 1:, :] += cy * phi[:, :-1, :]
        total[:, :, :-1] += cz * phi[:, :, 1:]
        total[:, :, 1:] += cz * phi[:, :, :-1]
        return total

    @staticmethod
    def _diagonal(faces: FaceCoefficients, shape: tuple[int, int, int]) -> NDArray[np.float64]:
        cx, cy, cz = faces
        diag = np.zeros(shape)
        diag[:-1, :, :] += cx
        diag[1:, :, :] += cx
        diag[:, :-1, :] += cy
        diag[:, 1:, :] += cy
        diag[:, :, :-1] += cz
        diag[:, :, 1:] += cz
        return diag

    def _check_size(self, geom: GridGeometry) -> None:
        if min(geom.shape) < MIN_AXIS_POINTS:
            raise DataError(f"Grid needs at least {MIN_AXIS_POINTS} points per axis")
        if geom.n_points > self.max_grid_points:
            raise GeometryError(
                f"{geom.n_points} grid points exceed the budget of {self.max_grid_points}",
                field="max_grid_points",
            )

    def _relax(
        self,
        geom: GridGeometry,
        phi: NDArray[np.float64],
        source: NDArray[np.float64],
        label: str,
        excitation: Optional[float],
    ) -> PotentialField:
        faces = self._faces(geom.permittivity)
        diag = self._diagonal(faces, geom.shape)
        free = ~geom.fixed_mask() & (diag > 0)
        inv_diag = np.where(diag > 0, 1.0 / np.where(diag > 0, diag, 1.0), 0.0)
        parity = np.indices(geom.shape).sum(axis=0) % 2
        colours = (free & (parity == 0), free & (parity == 1))
        omega = 2.0 / (1.0 + math.sin(math.pi / max(geom.shape)))
        history: list[float] = []

        for iteration in range(1, self.max_iterations + 1):
            for colour in colours:
                update = (self._neighbour_sum(phi, faces) + source) * inv_diag
                phi[colour] += omega * (update[colour] - phi[colour])
            if iteration % self.check_every:
                continue
            residual = (self._neighbour_sum(phi, faces) + source) * inv_diag - phi
            norm = float(np.abs(residual[free]).max()) if free.any() else 0.0
            scale = excitation if excitation is not None else max(float(np.abs(phi).max()), 1e-300)
            history.append(norm / scale)
            if history[-1] < self.tolerance:
                logger.debug(f"{geom.name}/{label}: converged after {iteration} iterations")
                return PotentialField(
                    geometry_name=geom.name,
                    electrode=label,
                    potential=phi,
                    iterations=iteration,
                    residual_history=tuple(history),
                )
        raise FieldSolverError(
            f"{geom.name}/{label}: no convergence within {self.max_iterations} iterations",
            history=history,
        )

    def solve_weighting_potential(self, geom: GridGeometry, electrode: str) -> PotentialField:
        """Potential with ``electrode`` at 1 V and every other conductor at 0 V.

        Args:
            geom: Grid geometry.
            electrode: Name of the excited electrode.

        Returns:
            The converged PotentialField.

        Raises:
            DataError: If the electrode is unknown or the grid is too small.
            FieldSolverError: If SOR does not converge.
        """
        if electrode not in geom.electrodes:
            raise DataError(f"Unknown electrode '{electrode}' in geometry '{geom.name}'")
        self._check_size(geom)
        phi = np.zeros(geom.shape)
        phi[geom.electrodes[electrode]] = 1.0
        logger.info(f"Solving weighting potential of '{electrode}' on {geom.name} {geom.shape}")
        return self._relax(geom, phi, np.zeros(geom.shape), electrode, excitation=1.0)

    def solve_point_charge(
        self, geom: GridGeometry, source_index: tuple[int, int, int]
    ) -> PotentialField:
        """Potential of a unit point source at a free node with all conductors grounded."""
        self._check_size(geom)
        if not all(0 <= i < n for i, n in zip(source_index, geom.shape)):
            raise DataError(f"Source index {source_index} is outside the grid")
        if geom.fixed_mask()[source_index]:
            raise DataError(f"Source index {source_index} lies on a fixed node")
        source = np.zeros(geom.shape)
        source[source_index] = 1.0
        return self._relax(geom, np.zeros(geom.shape), source, POINT_CHARGE, excitation=None)

    def induced_charge_direct(
        self, field: PotentialField, geom: GridGeometry, electrode: str
    ) -> float:
        """Charge on a grounded electrode from the discrete flux of a point-charge field.

        Q_k = -sum over faces (i in k, j outside k) of eps_ij * phi_j.
        """
        if electrode not in geom.electrodes:
            raise DataError(f"Unknown electrode '{electrode}' in geometry '{geom.name}'")
        mask = geom.electrodes[electrode].astype(np.float64)
        cx, cy, cz = self._faces(geom.permittivity)
        phi = field.potential
        outside = 1.0 - mask
        flux = (
            (cx * mask[:-1, :, :] * outside[1:, :, :] * phi[1:, :, :]).sum()
            + (cx * mask[1:, :, :] * outside[:-1, :, :] * phi[:-1, :, :]).sum()
            + (cy * mask[:, :-1, :] * outside[:, 1:, :] * phi[:, 1:, :]).sum()
            + (cy * mask[:, 1:, :] * outside[:, :-1, :] * phi[:, :-1, :]).sum()
            + (cz * mask[:, :, :-1] * outside[:, :, 1:] * phi[:, :, 1:]).sum()
            + (cz * mask[:, :, 1:] * outside[:, :, :-1] * phi[:, :, :-1]).sum()
        )
        return -float(flux)

    @staticmethod
    def induced_charge_map(
        geom: GridGeometry,
        combination: Mapping[str, float],
        weighting: Mapping[str, PotentialField],
    ) -> InducedChargeMap:
        """Induced charge per unit source charge, -sum_k w_k phi_k(r), by reciprocity.

        Raises:
            DataError: If a weighting solution for a combined electrode is missing.
        """
        if not combination:
            raise DataError("Electrode combination is empty")
        values = np.zeros(geom.shape)
        for name, weight in combination.items():
            if name not in weighting:
                raise DataError(f"Missing weighting solution for electrode '{name}'")
            values -= weight * weighting[name].potential
        return InducedChargeMap(
            geometry_name=geom.name,
            combination=dict(combination),
            values=values,
            substrate=geom.substrate_mask(),
            spacing=geom.spacing,
            z_surface_index=geom.z_surface_index,
        )

    @staticmethod
    def sensitive_volume(charge_map: InducedChargeMap, threshold: float) -> SensitiveVolume:
        """Substrate volume where |induced charge| >= threshold, with per-layer areas."""
        if not 0.0 < threshold <= 1.0:
            raise DataError("threshold must lie in (0, 1]")
        hit = charge_map.substrate & (np.abs(charge_map.values) >= threshold)
        h = charge_map.spacing
        layers = charge_map.z_surface_index
        per_layer = hit[:, :, :layers].sum(axis=(0, 1))
        count = int(hit.sum())
        return SensitiveVolume(
            threshold=threshold,
            volume_m3=count * h**3,
            cell_count=count,
            slice_z_m=(np.arange(layers) - layers) * h,
            slice_area_m2=per_layer * h**2,
        )

    def sensitive_volume_curve(
        self, charge_map: InducedChargeMap, thresholds: Sequence[float]
    ) -> list[SensitiveVolume]:
        """Sensitive volume at each threshold."""
        if len(thresholds) == 0:
            raise DataError("Threshold list is empty")
        return [self.sensitive_volume(charge_map, t) for t in thresholds]

    def build_device_geometries(
        self, scale: Optional[GeometryScale] = None
    ) -> tuple[GridGeometry, GridGeometry]:
        """Build the differential-paddle and single-island geometries.

        Both devices are thin films on the layer ``round(surface_fraction * cells)``
        over a substrate filling the layers below it. The paddles are mirrored
        about y = 0 across the gap; the island sits inside a grounded ring.

        Args:
            scale: Dimensions and grid settings.

        Returns:
            (differential, single_island).

        Raises:
            GeometryError: If the grid exceeds the memory bound or electrodes
                overlap or vanish after discretization.
        """
        cfg = scale or GeometryScale()
        n = cfg.points
        budget = min(cfg.max_grid_points, self.max_grid_points)
        if n**3 > budget:
            raise GeometryError(
                f"{n}^3 grid points exceed the budget of {budget}", field="cells"
            )
        surface = int(round(cfg.surface_fraction * cfg.cells))
        x = (np.arange(n) - (n - 1) / 2.0) * cfg.spacing
        gx, gy = np.meshgrid(x, x, indexing="ij")
        slack = 1e-9 * cfg.spacing

        def plane(mask2d: NDArray[np.bool_]) -> NDArray[np.bool_]:
            mask = np.zeros((n, n, n), dtype=bool)
            mask[:, :, surface] = mask2d
            return mask

        def substrate(eps: float) -> NDArray[np.float64]:
            permittivity = np.ones((n, n, n))
            permittivity[:, :, :surface] = eps
            return permittivity

        along = np.abs(gx) <= cfg.paddle_length / 2 + slack
        inner = cfg.paddle_gap / 2 - slack
        outer = cfg.paddle_gap / 2 + cfg.paddle_width + slack
        paddles = {
            "paddle_a": plane(along & (gy >= inner) & (gy <= outer)),
            "paddle_b": plane(along & (gy <= -inner) & (gy >= -outer)),
        }

        radius = np.maximum(np.abs(gx), np.abs(gy))
        ring_inner = cfg.island_size / 2 + cfg.island_clearance
        ring_outer = ring_inner + cfg.island_ground_width
        island = {
            "island": plane(radius <= cfg.island_size / 2 + slack),
            "ground": plane(
                (radius > ring_inner + slack) & (radius <= ring_outer + slack)
            ),
        }

        geometries = []
        for name, electrodes, eps in (
            ("differential", paddles, cfg.differential_permittivity),
            ("single_island", island, cfg.island_permittivity),
        ):
            names = list(electrodes)
            for key in names:
                if not electrodes[key].any():
                    raise GeometryError(f"Electrode '{key}' of {name} has no grid nodes")
            for i, first in enumerate(names):
                for second in names[i + 1 :]:
                    if np.any(electrodes[first] & electrodes[second]):
                        raise GeometryError(
                            f"Electrodes '{first}' and '{second}' of {name} overlap"
                        )
            geometries.append(
                GridGeometry(
                    name=name,
                    shape=(n, n, n),
                    spacing=cfg.spacing,
                    z_surface_index=surface,
                    permittivity=substrate(eps),
                    electrodes=electrodes,
                    boundary=BoundaryCondition.DIRICHLET,
                )
            )
        logger.info(f"Built device geometries on a {n}^3 grid, surface layer {surface}")
        return geometries[0], geometries[1]
