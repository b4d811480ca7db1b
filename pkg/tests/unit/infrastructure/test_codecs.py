"""Unit tests for artifact codecs."""

import json

import numpy as np
import pytest

from qudit_noise.domain.exceptions import DataError
from qudit_noise.domain.value_objects import TransmonParams
from qudit_noise.domain.value_objects.electrostatics import GridGeometry, InducedChargeMap
from qudit_noise.domain.value_objects.inference import (
    LabelPath,
    ModelSelectionReport,
    TransitionMatrix,
)
from qudit_noise.domain.value_objects.processes import ChargeTrace
from qudit_noise.domain.value_objects.readout import ShotTable
from qudit_noise.domain.value_objects.spectra import PsdEstimate, PsdMethod
from qudit_noise.domain.value_objects.transmon import SpectrumTable
from qudit_noise.infrastructure.codecs import (
    decode_charge_trace,
    decode_grid,
    decode_grid_slice,
    decode_json,
    decode_label_path,
    decode_model_selection,
    decode_psd,
    decode_shots,
    decode_shots_jsonl,
    decode_spectrum,
    decode_table,
    decode_transition_matrix,
    encode_charge_trace,
    encode_grid,
    encode_grid_slice,
    encode_json,
    encode_label_path,
    encode_model_selection,
    encode_psd,
    encode_shots,
    encode_shots_jsonl,
    encode_spectrum,
    encode_table,
    encode_transition_matrix,
    grid_header,
)


@pytest.fixture
def shots():
    """Four shots, one without a known state."""
    return ShotTable(
        t=np.array([0.0, 25e-6, 50e-6, 75e-6]),
        i_volt=np.array([0.1, -0.05, 0.1 / 3, 0.0]),
        q_volt=np.array([0.0, 0.2, -1e-17, 0.3]),
        band=np.array([0, 1, 0, 1], dtype=np.int64),
        truth_state=np.array([0, 1, -1, 3], dtype=np.int64),
    )


@pytest.fixture
def small_grid():
    """A 5x4x3 geometry with one electrode and its map."""
    shape = (5, 4, 3)
    electrode = np.zeros(shape, dtype=bool)
    electrode[2, 2, 2] = True
    geom = GridGeometry(
        name="toy",
        shape=shape,
        spacing=1e-4,
        z_surface_index=2,
        permittivity=np.ones(shape),
        electrodes={"pad": electrode},
    )
    values = np.arange(60, dtype=np.float64).reshape(shape) / 7.0
    charge_map = InducedChargeMap(
        geometry_name="toy",
        combination={"pad": 1.0},
        values=values,
        substrate=geom.substrate_mask(),
        spacing=geom.spacing,
        z_surface_index=geom.z_surface_index,
    )
    return geom, charge_map


class TestJson:
    """Tests for JSON artifacts."""

    def test_deterministic(self):
        """Test that key order does not change the bytes."""
        assert encode_json({"b": 1, "a": 2}) == encode_json({"a": 2, "b": 1})

    def test_numpy_values(self):
        """Test that numpy scalars and arrays are written as plain JSON."""
        data = encode_json({"x": np.float64(0.5), "n": np.int64(3), "v": np.arange(3)})

        assert decode_json(data) == {"x": 0.5, "n": 3, "v": [0, 1, 2]}
        assert data.endswith(b"\n")

    def test_malformed(self):
        """Test that malformed JSON raises DataError."""
        with pytest.raises(DataError, match="Malformed"):
            decode_json(b"{not json")


class TestSpectrumCsv:
    """Tests for spectrum.csv."""

    def test_header_and_values(self):
        """Test the column layout and exact float reconstruction."""
        table = SpectrumTable(
            n_g_grid=np.array([0.0, 0.5]),
            levels=np.array([[-1.0, 2.0 / 3.0], [-0.9, 0.7]]),
            n_cut=15,
            params=TransmonParams.device(),
        )

        data = encode_spectrum(table)
        grid, levels = decode_spectrum(data)

        assert data.splitlines()[0] == b"n_g,E_0,E_1"
        np.testing.assert_array_equal(grid, table.n_g_grid)
        np.testing.assert_array_equal(levels, table.levels)

    def test_wrong_header(self):
        """Test that a foreign CSV raises DataError."""
        with pytest.raises(DataError, match="Unexpected CSV header"):
            decode_spectrum(b"t_s,state\n0.0,1\n")

    def test_empty(self):
        """Test that an empty file raises DataError."""
        with pytest.raises(DataError, match="empty"):
            decode_spectrum(b"")


class TestShotCodecs:
    """Tests for shots.csv and shots.jsonl."""

    def test_csv_unknown_truth_blank(self, shots):
        """Test that an unknown state is written as an empty field."""
        lines = encode_shots(shots).decode().splitlines()

        assert lines[0] == "t_s,i_volt,q_volt,band,truth_state"
        assert lines[1].endswith(",even,0")
        assert lines[3].endswith(",even,")

    def test_csv_exact(self, shots):
        """Test that the CSV reader reproduces every column exactly."""
        decoded = decode_shots(encode_shots(shots))

        np.testing.assert_array_equal(decoded.t, shots.t)
        np.testing.assert_array_equal(decoded.i_volt, shots.i_volt)
        np.testing.assert_array_equal(decoded.q_volt, shots.q_volt)
        np.testing.assert_array_equal(decoded.band, shots.band)
        np.testing.assert_array_equal(decoded.truth_state, shots.truth_state)

    def test_jsonl_records(self, shots):
        """Test one JSON object per shot with null for an unknown state."""
        lines = encode_shots_jsonl(shots).decode().splitlines()
        records = [json.loads(line) for line in lines]

        assert len(records) == 4
        assert records[1]["band"] == "odd"
        assert records[2]["truth_state"] is None
        np.testing.assert_array_equal(decode_shots_jsonl(encode_shots_jsonl(shots)).t, shots.t)


class TestPathAndTraceCodecs:
    """Tests for decoded paths and charge traces."""

    def test_label_path(self):
        """Test decoded_path.csv."""
        path = LabelPath(times=np.array([0.0, 0.5, 1.0]), states=np.array([0, 1, 1]))

        decoded = decode_label_path(encode_label_path(path))

        np.testing.assert_array_equal(decoded.states, path.states)
        assert decoded.states.dtype == np.int64

    def test_charge_trace_with_labels(self):
        """Test that truth labels survive when present."""
        trace = ChargeTrace(
            times=np.array([0.0, 2.0, 4.0]),
            q=np.array([0.05, 0.25, 0.5]),
            temperature=0.01,
            truth_labels=np.array([0, 1, 2]),
        )

        decoded = decode_charge_trace(encode_charge_trace(trace))

        assert decoded.temperature == 0.01
        np.testing.assert_array_equal(decoded.q, trace.q)
        np.testing.assert_array_equal(decoded.truth_labels, trace.truth_labels)

    def test_charge_trace_without_labels(self):
        """Test that a trace without labels reads back without labels."""
        trace = ChargeTrace(times=np.array([0.0, 2.0]), q=np.array([0.1, 0.2]), temperature=0.05)

        assert decode_charge_trace(encode_charge_trace(trace)).truth_labels is None

    def test_charge_trace_no_samples(self):
        """Test that a header-only trace raises DataError."""
        with pytest.raises(DataError, match="no samples"):
            decode_charge_trace(b"t_s,q_e,temperature_K,truth_label\n")


class TestReportCodecs:
    """Tests for PSD, model-selection and transition artifacts."""

    def test_psd(self):
        """Test psd csv with its method restored from the caller."""
        psd = PsdEstimate(
            frequencies=np.array([0.1, 0.2]),
            values=np.array([1e-3, 5e-4]),
            method=PsdMethod.PERIODOGRAM,
        )

        decoded = decode_psd(encode_psd(psd), PsdMethod.PERIODOGRAM)

        np.testing.assert_array_equal(decoded.values, psd.values)
        assert decoded.method is PsdMethod.PERIODOGRAM

    def test_model_selection_booleans(self):
        """Test that validity is written as true/false and read back as bool."""
        report = ModelSelectionReport(
            orders=np.array([1, 2]),
            silhouette=np.array([0.0, 0.8]),
            train_test_distance=np.array([0.01, 0.02]),
            bic=np.array([100.0, 50.0]),
            bic_gradient=np.array([0.0, -50.0]),
            valid=np.array([True, False]),
            chosen=1,
        )

        data = encode_model_selection(report)
        rows = decode_model_selection(data)

        assert data.decode().splitlines()[1].endswith(",true")
        assert [r["valid"] for r in rows] == [True, False]
        assert rows[1]["order"] == 2

    def test_transition_matrix(self):
        """Test probabilities and per-row visit counts."""
        matrix = TransitionMatrix(
            probabilities=np.array([[0.75, 0.25], [0.0, 1.0]]),
            counts=np.array([[3, 1], [0, 5]]),
        )

        data = encode_transition_matrix(matrix)
        probabilities, counts = decode_transition_matrix(data)

        assert data.decode().splitlines()[0] == "from_state,p_0,p_1,count"
        np.testing.assert_array_equal(probabilities, matrix.probabilities)
        np.testing.assert_array_equal(counts, [4, 5])


class TestGridCodecs:
    """Tests for induced-charge grids."""

    def test_grid_bytes(self, small_grid):
        """Test little-endian float64 in C order."""
        geom, charge_map = small_grid

        data = encode_grid(charge_map.values)

        assert len(data) == 60 * 8
        np.testing.assert_array_equal(np.frombuffer(data, dtype="<f8")[:3], [0.0, 1 / 7, 2 / 7])

    def test_header_describes_grid(self, small_grid):
        """Test that the header carries dims, dtype and order."""
        geom, charge_map = small_grid

        header = grid_header(charge_map, geom)
        values = decode_grid(encode_grid(charge_map.values), header)

        assert header["dims"] == [5, 4, 3]
        assert header["dtype"] == "<f8"
        assert header["order"] == "C"
        np.testing.assert_array_equal(values, charge_map.values)

    def test_size_mismatch(self, small_grid):
        """Test that a truncated grid raises DataError."""
        geom, charge_map = small_grid
        header = grid_header(charge_map, geom)

        with pytest.raises(DataError, match="header expects"):
            decode_grid(encode_grid(charge_map.values)[:-8], header)

    def test_slice_is_central_plane(self, small_grid):
        """Test that the slice holds the y index at the grid centre."""
        geom, charge_map = small_grid

        rows = decode_grid_slice(encode_grid_slice(charge_map, geom))

        assert rows.shape == (5 * 3, 4)
        np.testing.assert_allclose(rows[:, 1], geom.axes()[1][2])
        np.testing.assert_array_equal(rows[:, 3], charge_map.values[:, 2, :].ravel())


class TestTable:
    """Tests for generic CSV tables."""

    def test_strings_verbatim(self):
        """Test that strings, booleans and missing keys are handled."""
        rows = [
            {"quantity": "dwell", "planted": 0.0059, "passed": True},
            {"quantity": "note, with comma", "planted": None},
        ]

        decoded = decode_table(encode_table(["quantity", "planted", "passed"], rows))

        assert decoded[0] == {"quantity": "dwell", "planted": "0.0059", "passed": "true"}
        assert decoded[1] == {"quantity": "note, with comma", "planted": "", "passed": ""}
