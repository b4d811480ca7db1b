"""Unit tests for the finite-difference electrostatics service."""

import numpy as np
import pytest

from qudit_noise.domain.exceptions import DataError, GeometryError
from qudit_noise.domain.services import FieldService
from qudit_noise.domain.value_objects import BoundaryCondition, GeometryScale, GridGeometry

N = 17


def plate_geometry(top_layer=N - 1):
    """Grounded plane at z = 0 and an excited plane at ``top_layer``, insulating sides."""
    bottom = np.zeros((N, N, N), dtype=bool)
    bottom[:, :, 0] = True
    top = np.zeros((N, N, N), dtype=bool)
    top[:, :, top_layer] = True
    return GridGeometry(
        name="plates",
        shape=(N, N, N),
        spacing=1e-4,
        z_surface_index=top_layer,
        permittivity=np.ones((N, N, N)),
        electrodes={"bottom": bottom, "top": top},
        boundary=BoundaryCondition.NEUMANN,
    )


def cube_geometry():
    """Small cubic electrode in the middle of a grounded box."""
    cube = np.zeros((N, N, N), dtype=bool)
    cube[7:10, 7:10, 7:10] = True
    return GridGeometry(
        name="cube",
        shape=(N, N, N),
        spacing=1e-4,
        z_surface_index=8,
        permittivity=np.ones((N, N, N)),
        electrodes={"cube": cube},
    )


@pytest.fixture
def device_geometries(field_service, small_fields_config):
    """Differential and single-island devices on a 16-cell grid."""
    return field_service.build_device_geometries(small_fields_config.to_domain(2_500_000))


class TestWeightingPotential:
    """Tests for weighting-potential solves."""

    def test_parallel_plates_are_linear(self, field_service):
        """Test the exact linear profile between plates with insulating sides."""
        field = field_service.solve_weighting_potential(plate_geometry(), "top")
        expected = np.broadcast_to(np.arange(N) / (N - 1), (N, N, N))
        np.testing.assert_allclose(field.potential, expected, atol=1e-4)
        assert field.final_residual < 1e-9

    def test_decays_away_from_electrode(self, field_service):
        """Test monotonic decay along an axis leaving the electrode."""
        field = field_service.solve_weighting_potential(cube_geometry(), "cube")
        profile = field.potential[9:, 8, 8]
        assert profile[0] == 1.0
        assert np.all(np.diff(profile) < 0)

    def test_potential_bounded_by_electrodes(self, field_service, device_geometries):
        """Test the maximum principle on the island device."""
        _, island = device_geometries
        field = field_service.solve_weighting_potential(island, "island")
        assert field.potential.min() >= -1e-9
        assert field.potential.max() == pytest.approx(1.0)
        assert np.all(field.potential[island.electrodes["ground"]] == 0.0)

    def test_unknown_electrode(self, field_service):
        """Test that a missing electrode raises DataError."""
        with pytest.raises(DataError, match="Unknown electrode"):
            field_service.solve_weighting_potential(cube_geometry(), "gate")

    def test_grid_too_small(self, field_service):
        """Test that fewer than 16 points per axis raise DataError."""
        mask = np.zeros((9, 9, 9), dtype=bool)
        mask[4, 4, 4] = True
        geom = GridGeometry("tiny", (9, 9, 9), 1e-4, 4, np.ones((9, 9, 9)), {"dot": mask})
        with pytest.raises(DataError, match="16 points"):
            field_service.solve_weighting_potential(geom, "dot")

    def test_grid_budget(self):
        """Test that a node count over budget raises GeometryError."""
        service = FieldService(max_grid_points=1000)
        with pytest.raises(GeometryError):
            service.solve_weighting_potential(cube_geometry(), "cube")


class TestInducedCharge:
    """Tests for reciprocity maps and sensitive volumes."""

    def test_reciprocity_matches_direct_solve(self, field_service, device_geometries):
        """Test that the reciprocity map agrees with a point-charge solve within 3%."""
        _, island = device_geometries
        weighting = {"island": field_service.solve_weighting_potential(island, "island")}
        charge_map = FieldService.induced_charge_map(island, {"island": 1.0}, weighting)
        source = (N // 2, N // 2, island.z_surface_index - 2)
        point = field_service.solve_point_charge(island, source)
        direct = field_service.induced_charge_direct(point, island, "island")
        assert direct == pytest.approx(charge_map.values[source], rel=0.03)
        assert direct < 0

    def test_adjacent_source_nearly_fully_induced(self, field_service):
        """Test that a source next to a large electrode induces more than 0.9 e."""
        geom = plate_geometry(top_layer=12)
        weighting = {"top": field_service.solve_weighting_potential(geom, "top")}
        charge_map = FieldService.induced_charge_map(geom, {"top": 1.0}, weighting)
        assert abs(charge_map.values[N // 2, N // 2, 11]) > 0.9

    def test_differential_map_vanishes_on_mirror_plane(self, field_service, device_geometries):
        """Test that the paddle difference is zero on the symmetry plane y = 0."""
        differential, _ = device_geometries
        weighting = {
            name: field_service.solve_weighting_potential(differential, name)
            for name in ("paddle_a", "paddle_b")
        }
        charge_map = FieldService.induced_charge_map(
            differential, {"paddle_a": 1.0, "paddle_b": -1.0}, weighting
        )
        assert np.abs(charge_map.values[:, N // 2, :]).max() < 1e-4

    def test_missing_weighting_solution(self):
        """Test that combining an unsolved electrode raises DataError."""
        with pytest.raises(DataError, match="Missing"):
            FieldService.induced_charge_map(cube_geometry(), {"cube": 1.0}, {})

    def test_point_charge_on_conductor(self, field_service):
        """Test that a source inside an electrode raises DataError."""
        with pytest.raises(DataError, match="fixed node"):
            field_service.solve_point_charge(cube_geometry(), (8, 8, 8))

    def test_sensitive_volume_thresholds(self, field_service, device_geometries):
        """Test that the volume shrinks with threshold and vanishes at 1."""
        _, island = device_geometries
        weighting = {"island": field_service.solve_weighting_potential(island, "island")}
        charge_map = FieldService.induced_charge_map(island, {"island": 1.0}, weighting)
        curve = field_service.sensitive_volume_curve(charge_map, [1e-3, 1e-2, 0.1, 1.0])
        counts = [v.cell_count for v in curve]
        assert counts == sorted(counts, reverse=True)
        assert counts[0] <= int(island.substrate_mask().sum())
        assert curve[-1].volume_m3 == 0.0
        assert curve[0].slice_area_m2.sum() * island.spacing == pytest.approx(curve[0].volume_m3)

    def test_threshold_range(self, device_geometries):
        """Test that thresholds outside (0, 1] raise DataError."""
        from qudit_noise.domain.value_objects import InducedChargeMap

        charge_map = InducedChargeMap(
            "x", {"a": 1.0}, np.zeros((N, N, N)), np.ones((N, N, N), dtype=bool), 1e-4
        )
        with pytest.raises(DataError):
            FieldService.sensitive_volume(charge_map, 0.0)
        with pytest.raises(DataError):
            FieldService().sensitive_volume_curve(charge_map, [])

    def test_larger_island_has_larger_volume(self, field_service):
        """Test that doubling lateral dimensions grows the sensitive volume."""
        base = GeometryScale(cells=16, spacing=50e-6)
        volumes = []
        for scale in (base, base.lateral_scaled(2.0)):
            _, island = field_service.build_device_geometries(scale)
            weighting = {"island": field_service.solve_weighting_potential(island, "island")}
            charge_map = FieldService.induced_charge_map(island, {"island": 1.0}, weighting)
            volumes.append(FieldService.sensitive_volume(charge_map, 0.05).volume_m3)
        assert volumes[1] > volumes[0]


class TestDeviceGeometries:
    """Tests for building the two device geometries."""

    def test_layout(self, device_geometries):
        """Test electrode names, surface layer and substrate permittivity."""
        differential, island = device_geometries
        assert set(differential.electrodes) == {"paddle_a", "paddle_b"}
        assert set(island.electrodes) == {"island", "ground"}
        assert differential.shape == (17, 17, 17)
        assert differential.z_surface_index == 10
        assert island.to_dict()["substrate_permittivity"] == pytest.approx(11.7)
        paddles = differential.electrodes
        assert paddles["paddle_a"].sum() == paddles["paddle_b"].sum()

    def test_zero_gap_overlaps(self, field_service):
        """Test that paddles touching across a zero gap raise GeometryError."""
        scale = GeometryScale(cells=16, spacing=200e-6, paddle_gap=0.0)
        with pytest.raises(GeometryError, match="overlap"):
            field_service.build_device_geometries(scale)

    def test_budget_exceeded(self):
        """Test that an over-budget grid raises GeometryError."""
        with pytest.raises(GeometryError, match="budget"):
            FieldService(max_grid_points=1000).build_device_geometries(GeometryScale(cells=16))
