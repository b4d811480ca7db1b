"""Unit tests for domain value objects."""

import math

import numpy as np
import pytest

from qudit_noise.domain.value_objects import (
    ChargeEnvConfig,
    DwellEstimate,
    EmissionKind,
    GeometryScale,
    HiddenMarkov,
    IqClusterModel,
    LabelPath,
    ParityBands,
    ParityPath,
    ParityProcessConfig,
    PsdEstimate,
    PsdMethod,
    ResetBoundaries,
    ResetPulse,
    SegmentConfig,
    ShotTable,
    TargetBand,
    TransitionMatrix,
    TransmonParams,
    TridiagonalMatrix,
)
from qudit_noise.domain.value_objects.transmon import fold_offset


class TestTransmonParams:
    """Tests for TransmonParams value object."""

    def test_device_parameters(self):
        """Test the characterised device energies."""
        params = TransmonParams.device()
        assert params.e_j == pytest.approx(6.3366)
        assert params.e_c == pytest.approx(0.2083)
        assert params.in_transmon_regime

    def test_from_ratio(self):
        """Test building parameters from an e_j/e_c ratio."""
        params = TransmonParams.from_ratio(80.0)
        assert params.ratio == pytest.approx(80.0)

    def test_charging_only_limit_allowed(self):
        """Test that e_j = 0 is accepted."""
        params = TransmonParams(e_j=0.0, e_c=0.2083)
        assert not params.in_transmon_regime

    @pytest.mark.parametrize("e_j, e_c", [(-1.0, 0.2), (6.0, 0.0), (math.nan, 0.2)])
    def test_invalid_energies(self, e_j, e_c):
        """Test that invalid energies raise ValueError."""
        with pytest.raises(ValueError):
            TransmonParams(e_j=e_j, e_c=e_c)

    def test_is_immutable(self):
        """Test that TransmonParams is frozen."""
        params = TransmonParams.device()
        with pytest.raises(AttributeError):
            params.e_j = 1.0


class TestFoldOffset:
    """Tests for offset folding."""

    def test_fold_into_half_period(self):
        """Test folding by periodicity and mirror symmetry."""
        folded = fold_offset(np.array([0.1, 0.7, 1.2, -0.1, 0.5]))
        np.testing.assert_allclose(folded, [0.1, 0.3, 0.2, 0.1, 0.5])


class TestTridiagonalMatrix:
    """Tests for TridiagonalMatrix value object."""

    def test_dense_round_trip(self):
        """Test conversion to and from a dense matrix."""
        dense = np.array([[2.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 2.0]])
        matrix = TridiagonalMatrix.from_dense(dense)
        np.testing.assert_array_equal(matrix.to_dense(), dense)

    def test_rejects_non_tridiagonal(self):
        """Test that a full matrix is rejected."""
        with pytest.raises(ValueError, match="tridiagonal"):
            TridiagonalMatrix.from_dense(np.ones((3, 3)))

    def test_rejects_asymmetric(self):
        """Test that an asymmetric matrix is rejected."""
        with pytest.raises(ValueError, match="symmetric"):
            TridiagonalMatrix.from_dense(np.array([[0.0, 1.0], [2.0, 0.0]]))


class TestParityBands:
    """Tests for ParityBands value object."""

    def test_band_frequencies(self):
        """Test band frequencies at integer and half-integer offsets."""
        bands = ParityBands(i=1, j=2, f_bar_ghz=3.2, eps_ghz=60e-6)
        plus, minus = bands.band_frequencies(0.0)
        assert plus == pytest.approx(3.2 + 60e-6)
        assert minus == pytest.approx(3.2 - 60e-6)
        plus, minus = bands.band_frequencies(0.5)
        assert plus == pytest.approx(minus)
        assert bands.max_splitting_ghz == pytest.approx(120e-6)

    def test_invalid_levels(self):
        """Test that i >= j raises ValueError."""
        with pytest.raises(ValueError):
            ParityBands(i=2, j=1, f_bar_ghz=3.0, eps_ghz=0.0)

    def test_negative_eps(self):
        """Test that a negative dispersion is rejected."""
        with pytest.raises(ValueError):
            ParityBands(i=0, j=1, f_bar_ghz=3.0, eps_ghz=-1e-6)


class TestReadout:
    """Tests for readout value objects."""

    def test_target_band_parity(self):
        """Test band to parity mapping."""
        assert TargetBand.EVEN.parity == 0
        assert TargetBand.from_parity(1) is TargetBand.ODD

    def test_reset_pulses(self):
        """Test the state produced by each reset sequence."""
        assert ResetPulse.NONE.apply(3) == 3
        assert ResetPulse.PI01.apply(1) == 0
        assert ResetPulse.PI12_PI01.apply(2) == 0

    def test_default_cluster_model(self):
        """Test the default square cluster layout."""
        model = IqClusterModel.default()
        assert model.n_states == 4
        np.testing.assert_allclose(model.means[2], [0.1, 0.1])
        np.testing.assert_allclose(model.error_matrix.sum(axis=1), 1.0)
        assert model.error_matrix[2, 1] == pytest.approx(0.05)

    def test_noiseless_cluster_model(self):
        """Test that the noiseless model has zero covariance."""
        model = IqClusterModel.noiseless()
        assert np.all(model.covariances == 0)
        np.testing.assert_array_equal(model.error_matrix, np.eye(4))

    def test_cluster_model_rejects_non_stochastic(self):
        """Test that a non-stochastic error matrix is rejected."""
        base = IqClusterModel.default()
        with pytest.raises(ValueError, match="row-stochastic"):
            IqClusterModel(base.means, base.covariances, np.full((4, 4), 0.5))

    def test_reset_boundaries(self):
        """Test quadrant classification and the boundary tie rule."""
        boundaries = ResetBoundaries.from_cluster_model(IqClusterModel.default())
        assert boundaries.i_threshold == pytest.approx(0.05)
        assert boundaries.classify(0.0, 0.0) == 0
        assert boundaries.classify(0.1, 0.0) == 1
        assert boundaries.classify(0.1, 0.1) == 2
        assert boundaries.classify(0.0, 0.1) == 3
        assert boundaries.classify(0.05, 0.0) == 0

    def test_reset_boundaries_need_every_state(self):
        """Test that duplicate region labels are rejected."""
        with pytest.raises(ValueError):
            ResetBoundaries(0.0, 0.0, regions=(0, 0, 1, 2))

    def test_shot_table_select_band(self):
        """Test splitting a shot table by probed band."""
        table = ShotTable(
            t=np.array([0.0, 1.0, 2.0, 3.0]),
            i_volt=np.zeros(4),
            q_volt=np.zeros(4),
            band=np.array([0, 1, 0, 1]),
            truth_state=np.array([0, 1, -1, 0]),
        )
        odd = table.select_band(TargetBand.ODD)
        assert len(odd) == 2
        np.testing.assert_array_equal(odd.t, [1.0, 3.0])
        assert table.record(2).truth_state is None

    def test_shot_table_rejects_unordered_times(self):
        """Test that timestamps must increase."""
        with pytest.raises(ValueError, match="increasing"):
            ShotTable(
                t=np.array([1.0, 0.0]),
                i_volt=np.zeros(2),
                q_volt=np.zeros(2),
                band=np.zeros(2, dtype=np.int64),
                truth_state=np.zeros(2, dtype=np.int64),
            )


class TestProcesses:
    """Tests for process configurations and paths."""

    def test_parity_config_cycles(self):
        """Test cycle counting and the undersampling flag."""
        config = ParityProcessConfig(duration=1.0)
        assert config.n_cycles == 20000
        assert not config.undersampled
        assert ParityProcessConfig(dwell_time=1e-5, duty_cycle=5e-5).undersampled

    def test_parity_config_rejects_zero_dwell(self):
        """Test that a zero dwell time is rejected."""
        with pytest.raises(ValueError):
            ParityProcessConfig(dwell_time=0.0)

    def test_parity_path_lookup(self):
        """Test parity lookup and dwell extraction."""
        path = ParityPath(flip_times=np.array([1.0, 3.0]), initial_parity=1, duration=4.0)
        np.testing.assert_array_equal(path.parity_at(np.array([0.5, 1.0, 2.0, 3.5])), [1, 0, 0, 1])
        np.testing.assert_allclose(path.dwell_times(), [1.0, 2.0, 1.0])

    def test_charge_env_rates(self):
        """Test generator rows and the planted stable time at base temperature."""
        config = ChargeEnvConfig.default()
        q = config.rate_matrix(0.010)
        np.testing.assert_allclose(q.sum(axis=1), 0.0, atol=1e-15)
        assert config.mean_stable_time(0.010) == pytest.approx(22 * 60.0)
        np.testing.assert_allclose(config.transition_matrix(0.010).sum(axis=1), 1.0)

    def test_charge_env_temperature_scaling(self):
        """Test that hops speed up with temperature."""
        config = ChargeEnvConfig.default()
        assert config.neighbor_rate(0.100) == pytest.approx(10 * config.neighbor_rate(0.010))
        assert config.mean_stable_time(0.100) < config.mean_stable_time(0.010)

    def test_charge_env_hop_masses_across_temperatures(self):
        """Test that neighbour rates rise with temperature while scramble rates stay fixed."""
        config = ChargeEnvConfig.default()
        distance = np.abs(np.subtract.outer(np.arange(config.n_states), np.arange(config.n_states)))
        near = (distance > 0) & (distance <= config.neighbor_reach)
        far = distance > config.neighbor_reach
        generators = [config.rate_matrix(t) for t in config.temperatures]
        neighbor = [np.where(near, q, 0.0).sum(axis=1) for q in generators]
        scramble = [np.where(far, q, 0.0).sum(axis=1) for q in generators]
        for low, high in zip(neighbor, neighbor[1:]):
            assert np.all(high > low)
        for rows in scramble[1:]:
            np.testing.assert_allclose(rows, scramble[0], rtol=1e-12)
        np.testing.assert_allclose(scramble[0], config.scramble_rate)

    def test_charge_env_compression(self):
        """Test that compression shortens the run and the dwell alike."""
        config = ChargeEnvConfig.default()
        fast = config.compressed(4.0)
        assert fast.duration == pytest.approx(config.duration / 4)
        assert fast.mean_stable_time(0.010) == pytest.approx(config.mean_stable_time(0.010) / 4)

    def test_charge_env_rejects_unsorted_offsets(self):
        """Test that offsets must be strictly increasing."""
        with pytest.raises(ValueError, match="increasing"):
            ChargeEnvConfig(offsets=(0.2, 0.1))


class TestInference:
    """Tests for inference value objects."""

    def test_hidden_markov_canonical_order(self):
        """Test that canonical order sorts states by emission mean."""
        model = HiddenMarkov(
            initial=np.array([0.3, 0.7]),
            transitions=np.array([[0.9, 0.1], [0.2, 0.8]]),
            kind=EmissionKind.GAUSSIAN,
            means=np.array([0.4, 0.1]),
            variances=np.array([0.01, 0.02]),
        )
        canonical = model.canonical()
        np.testing.assert_allclose(canonical.means, [0.1, 0.4])
        np.testing.assert_allclose(canonical.transitions, [[0.8, 0.2], [0.1, 0.9]])
        np.testing.assert_allclose(canonical.initial, [0.7, 0.3])

    def test_hidden_markov_rejects_bad_rows(self):
        """Test that non-stochastic transitions are rejected."""
        with pytest.raises(ValueError, match="sum to 1"):
            HiddenMarkov(
                initial=np.array([0.5, 0.5]),
                transitions=np.array([[0.5, 0.4], [0.5, 0.5]]),
                kind=EmissionKind.CATEGORICAL,
                emission_probs=np.eye(2),
            )

    def test_label_path_flips(self):
        """Test flip index extraction and relabeling."""
        path = LabelPath(times=np.arange(5.0), states=np.array([0, 0, 1, 1, 0]))
        np.testing.assert_array_equal(path.flip_indices(), [2, 4])
        np.testing.assert_array_equal(path.relabeled(np.array([1, 0])).states, [1, 1, 0, 0, 1])
        assert path.sample_interval == 1.0

    def test_transition_matrix_masses(self):
        """Test neighbour and scramble mass bookkeeping."""
        counts = np.array([[8, 1, 0, 1], [0, 9, 1, 0], [0, 0, 10, 0], [0, 0, 0, 10]])
        matrix = TransitionMatrix(
            probabilities=counts / counts.sum(axis=1, keepdims=True),
            counts=counts,
            neighbor_reach=2,
            duration_s=7200.0,
        )
        assert matrix.scramble_count == 1
        assert matrix.neighbor_mass == pytest.approx(2 / 40)
        assert matrix.scramble_mass == pytest.approx(1 / 40)
        assert matrix.scramble_interval_hours == pytest.approx(2.0)
        assert np.all(np.diag(matrix.display_matrix()) == 0)


class TestSpectra:
    """Tests for spectral value objects."""

    def test_dwell_conventions(self):
        """Test the three knee-to-dwell readings."""
        estimate = DwellEstimate(knee_hz=169.0)
        assert estimate.knee_reciprocal_s == pytest.approx(5.917e-3, rel=1e-3)
        assert estimate.angular_s == pytest.approx(1 / (2 * math.pi * 169.0))
        assert estimate.telegraph_dwell_s == pytest.approx(1 / (math.pi * 169.0))

    def test_segment_config_limits(self):
        """Test segment length and overlap validation."""
        with pytest.raises(ValueError):
            SegmentConfig(nperseg=8)
        with pytest.raises(ValueError):
            SegmentConfig(overlap=1.0)
        assert SegmentConfig.periodogram().nperseg is None

    def test_psd_estimate_excludes_dc(self):
        """Test that a DC bin is rejected."""
        with pytest.raises(ValueError, match="DC"):
            PsdEstimate(np.array([0.0, 1.0]), np.ones(2), PsdMethod.PERIODOGRAM)

    def test_psd_integrated_power(self):
        """Test integration and band restriction."""
        psd = PsdEstimate(np.arange(1.0, 11.0), np.full(10, 2.0), PsdMethod.PERIODOGRAM)
        assert psd.integrated_power() == pytest.approx(20.0)
        assert psd.restricted(2.0, 4.0).frequencies.size == 3


class TestGeometryScale:
    """Tests for GeometryScale value object."""

    def test_points(self):
        """Test node count per axis."""
        assert GeometryScale().points == 65

    def test_lateral_scaling(self):
        """Test that lateral scaling leaves the grid untouched."""
        scaled = GeometryScale().lateral_scaled(2.0)
        assert scaled.paddle_length == pytest.approx(2e-3)
        assert scaled.island_size == pytest.approx(0.3e-3)
        assert scaled.spacing == GeometryScale().spacing

    @pytest.mark.parametrize("cells", [7, 6, 15])
    def test_invalid_cells(self, cells):
        """Test that odd or tiny cell counts are rejected."""
        with pytest.raises(ValueError):
            GeometryScale(cells=cells)
