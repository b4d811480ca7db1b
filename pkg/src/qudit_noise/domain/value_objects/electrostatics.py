"""Finite-difference electrostatics value objects."""

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Mapping

import numpy as np
from numpy.typing import NDArray


class BoundaryCondition(str, Enum):
    """Condition on the faces of the simulation box."""

    DIRICHLET = "dirichlet"
    NEUMANN = "neumann"


@dataclass(frozen=True, eq=False)
class GridGeometry:
    """Uniform node grid with dielectric map and named electrode masks.

    Node (i, j, k) sits at ((i - (nx-1)/2) h, (j - (ny-1)/2) h, z0 + k h); the
    device plane is z = 0 and the substrate fills z < 0.
    """

    name: str
    shape: tuple[int, int, int]
    spacing: float
    z_surface_index: int
    permittivity: NDArray[np.float64]
    electrodes: Mapping[str, NDArray[np.bool_]]
    boundary: BoundaryCondition = BoundaryCondition.DIRICHLET

    def __post_init__(self) -> None:
        """Validate masks, permittivity and grid size."""
        if min(self.shape) < 3 or self.spacing <= 0:
            raise ValueError("Grid needs at least 3 points per axis and positive spacing")
        if self.permittivity.shape != self.shape or np.any(self.permittivity < 1.0):
            raise ValueError("Permittivity must match the grid and be >= 1")
        if not 0 <= self.z_surface_index < self.shape[2]:
            raise ValueError("z_surface_index out of range")
        occupied = np.zeros(self.shape, dtype=np.int64)
        for name, mask in self.electrodes.items():
            if mask.shape != self.shape:
                raise ValueError(f"Electrode '{name}' mask does not match the grid")
            occupied += mask
        if np.any(occupied > 1):
            raise ValueError("Electrode masks overlap")

    @property
    def n_points(self) -> int:
        """Total node count."""
        return int(np.prod(self.shape))

    @property
    def cell_volume(self) -> float:
        """Volume per node, m^3."""
        return self.spacing**3

    def axes(self) -> tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.float64]]:
        """Node coordinates along x, y and z in metres."""
        nx, ny, nz = self.shape
        h = self.spacing
        x = (np.arange(nx) - (nx - 1) / 2.0) * h
        y = (np.arange(ny) - (ny - 1) / 2.0) * h
        z = (np.arange(nz) - self.z_surface_index) * h
        return x, y, z

    def conductor_mask(self) -> NDArray[np.bool_]:
        """Union of all electrode masks."""
        union = np.zeros(self.shape, dtype=bool)
        for mask in self.electrodes.values():
            union |= mask
        return union

    def boundary_mask(self) -> NDArray[np.bool_]:
        """Nodes on the box faces."""
        mask = np.zeros(self.shape, dtype=bool)
        mask[[0, -1], :, :] = True
        mask[:, [0, -1], :] = True
        mask[:, :, [0, -1]] = True
        return mask

    def fixed_mask(self) -> NDArray[np.bool_]:
        """Nodes held at a prescribed potential."""
        fixed = self.conductor_mask()
        if self.boundary is BoundaryCondition.DIRICHLET:
            fixed |= self.boundary_mask()
        return fixed

    def substrate_mask(self) -> NDArray[np.bool_]:
        """Free nodes strictly below the device plane."""
        below = np.zeros(self.shape, dtype=bool)
        below[:, :, : self.z_surface_index] = True
        return below & ~self.fixed_mask()

    def to_dict(self) -> dict[str, object]:
        """Serialize the geometry description (masks as node counts)."""
        return {
            "name": self.name,
            "shape": list(self.shape),
            "spacing_m": self.spacing,
            "z_surface_index": self.z_surface_index,
            "boundary": self.boundary.value,
            "electrodes": {name: int(mask.sum()) for name, mask in self.electrodes.items()},
            "substrate_permittivity": float(self.permittivity[:, :, 0].max()),
        }


@dataclass(frozen=True, eq=False)
class PotentialField:
    """Converged potential for one electrode excitation."""

    geometry_name: str
    electrode: str
    potential: NDArray[np.float64]
    iterations: int
    residual_history: tuple[float, ...] = field(default=(), repr=False)

    @property
    def final_residual(self) -> float:
        """Last recorded residual max-norm."""
        return self.residual_history[-1] if self.residual_history else 0.0


@dataclass(frozen=True, eq=False)
class InducedChargeMap:
    """Induced charge per unit source charge for an electrode combination."""

    geometry_name: str
    combination: Mapping[str, float]
    values: NDArray[np.float64]
    substrate: NDArray[np.bool_]
    spacing: float
    z_surface_index: int = 0

    @property
    def substrate_values(self) -> NDArray[np.float64]:
        """Map values at substrate nodes."""
        return self.values[self.substrate]


@dataclass(frozen=True, eq=False)
class SensitiveVolume:
    """Charge-sensitive substrate volume at one threshold."""

    threshold: float
    volume_m3: float
    cell_count: int
    slice_z_m: NDArray[np.float64] = field(repr=False)
    slice_area_m2: NDArray[np.float64] = field(repr=False)


@dataclass(frozen=True)
class GeometryScale:
    """Lateral dimensions and grid settings for the two device geometries, in metres."""

    cells: int = 64
    spacing: float = 50e-6
    surface_fraction: float = 0.625
    paddle_length: float = 1.0e-3
    paddle_width: float = 0.6e-3
    paddle_gap: float = 0.2e-3
    island_size: float = 0.15e-3
    island_clearance: float = 50e-6
    island_ground_width: float = 0.3e-3
    differential_permittivity: float = 10.0
    island_permittivity: float = 11.7
    max_grid_points: int = 2_500_000

    def __post_init__(self) -> None:
        """Validate dimensions."""
        if self.cells < 8 or self.cells % 2:
            raise ValueError("cells must be an even number >= 8")
        if self.spacing <= 0:
            raise ValueError("spacing must be positive")
        if not 0.0 < self.surface_fraction < 1.0:
            raise ValueError("surface_fraction must lie in (0, 1)")
        if min(self.paddle_length, self.paddle_width, self.island_size) <= 0:
            raise ValueError("Electrode dimensions must be positive")
        if self.paddle_gap < 0 or self.island_clearance < 0:
            raise ValueError("Gaps cannot be negative")

    @property
    def points(self) -> int:
        """Grid points per axis."""
        return self.cells + 1

    def lateral_scaled(self, factor: float) -> "GeometryScale":
        """Return a copy with every lateral electrode dimension multiplied by ``factor``."""
        return replace(
            self,
            paddle_length=self.paddle_length * factor,
            paddle_width=self.paddle_width * factor,
            paddle_gap=self.paddle_gap * factor,
            island_size=self.island_size * factor,
            island_clearance=self.island_clearance * factor,
            island_ground_width=self.island_ground_width * factor,
        )
