"""Artifact encoders and decoders.

Every writer emits floats with ``repr`` precision, so the matching reader
reconstructs the written values exactly.
"""

import csv
import io
import json
from typing import Any, Iterable, Mapping, Sequence

import numpy as np
from numpy.typing import NDArray

from qudit_noise.domain.exceptions import DataError
from qudit_noise.domain.value_objects.electrostatics import GridGeometry, InducedChargeMap
from qudit_noise.domain.value_objects.inference import (
    LabelPath,
    ModelSelectionReport,
    TransitionMatrix,
)
from qudit_noise.domain.value_objects.processes import ChargeTrace
from qudit_noise.domain.value_objects.readout import ShotTable, TargetBand
from qudit_noise.domain.value_objects.spectra import PsdEstimate, PsdMethod
from qudit_noise.domain.value_objects.transmon import SpectrumTable

FORMAT_VERSION = 1
GRID_DTYPE = "<f8"


def _num(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def _write_rows(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> bytes:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(["" if v is None else v if isinstance(v, str) else _num(v) for v in row])
    return buffer.getvalue().encode("utf-8")


def _read_rows(
    data: bytes, expected: Sequence[str] | None = None
) -> tuple[list[str], list[list[str]]]:
    reader = csv.reader(io.StringIO(data.decode("utf-8")))
    try:
        header = next(reader)
    except StopIteration as e:
        raise DataError("CSV artifact is empty") from e
    if expected is not None and list(expected) != header[: len(expected)]:
        raise DataError(f"Unexpected CSV header {header}, wanted {list(expected)}")
    return header, [row for row in reader if row]


def _to_builtin(value: Any) -> Any:
    if isinstance(value, Mapping):
        return {str(k): _to_builtin(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_to_builtin(v) for v in value]
    if isinstance(value, np.ndarray):
        return _to_builtin(value.tolist())
    if isinstance(value, np.generic):
        return value.item()
    return value


def encode_json(payload: Any) -> bytes:
    """Deterministic JSON: sorted keys, two-space indent, trailing newline."""
    return (json.dumps(_to_builtin(payload), indent=2, sort_keys=True) + "\n").encode("utf-8")


def decode_json(data: bytes) -> Any:
    """Parse a JSON artifact."""
    try:
        return json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise DataError(f"Malformed JSON artifact: {e}") from e


# spectrum


def encode_spectrum(table: SpectrumTable) -> bytes:
    """spectrum.csv: n_g, E_0 ... E_L in GHz."""
    header = ["n_g"] + [f"E_{i}" for i in range(table.levels.shape[1])]
    rows = ([n_g, *levels] for n_g, levels in zip(table.n_g_grid, table.levels))
    return _write_rows(header, rows)


def decode_spectrum(data: bytes) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Return (n_g grid, levels) from spectrum.csv."""
    _, rows = _read_rows(data, ["n_g"])
    values = np.array([[float(v) for v in row] for row in rows])
    return values[:, 0], values[:, 1:]


# shots


def encode_shots(shots: ShotTable) -> bytes:
    """shots.csv: t_s, i_volt, q_volt, band, truth_state (blank when unknown)."""
    rows = (
        [
            t,
            i,
            q,
            TargetBand.from_parity(int(b)).value,
            _num(s) if s >= 0 else "",
        ]
        for t, i, q, b, s in zip(shots.t, shots.i_volt, shots.q_volt, shots.band, shots.truth_state)
    )
    return _write_rows(["t_s", "i_volt", "q_volt", "band", "truth_state"], rows)


def decode_shots(data: bytes) -> ShotTable:
    """Rebuild a ShotTable from shots.csv."""
    _, rows = _read_rows(data, ["t_s", "i_volt", "q_volt", "band", "truth_state"])
    return ShotTable(
        t=np.array([float(r[0]) for r in rows]),
        i_volt=np.array([float(r[1]) for r in rows]),
        q_volt=np.array([float(r[2]) for r in rows]),
        band=np.array([TargetBand(r[3]).parity for r in rows], dtype=np.int64),
        truth_state=np.array([int(r[4]) if r[4] else -1 for r in rows], dtype=np.int64),
    )


def encode_shots_jsonl(shots: ShotTable) -> bytes:
    """shots.jsonl: one JSON object per shot with the CSV fields."""
    lines = []
    for k in range(len(shots)):
        truth = int(shots.truth_state[k])
        lines.append(
            json.dumps(
                {
                    "t_s": float(shots.t[k]),
                    "i_volt": float(shots.i_volt[k]),
                    "q_volt": float(shots.q_volt[k]),
                    "band": TargetBand.from_parity(int(shots.band[k])).value,
                    "truth_state": truth if truth >= 0 else None,
                },
                sort_keys=True,
            )
        )
    return ("\n".join(lines) + "\n").encode("utf-8")


def decode_shots_jsonl(data: bytes) -> ShotTable:
    """Rebuild a ShotTable from shots.jsonl."""
    records = [json.loads(line) for line in data.decode("utf-8").splitlines() if line.strip()]
    return ShotTable(
        t=np.array([r["t_s"] for r in records], dtype=np.float64),
        i_volt=np.array([r["i_volt"] for r in records], dtype=np.float64),
        q_volt=np.array([r["q_volt"] for r in records], dtype=np.float64),
        band=np.array([TargetBand(r["band"]).parity for r in records], dtype=np.int64),
        truth_state=np.array(
            [-1 if r["truth_state"] is None else r["truth_state"] for r in records],
            dtype=np.int64,
        ),
    )


# paths and traces


def encode_label_path(path: LabelPath) -> bytes:
    """decoded_path.csv: t_s, state."""
    return _write_rows(["t_s", "state"], zip(path.times, path.states))


def decode_label_path(data: bytes) -> LabelPath:
    """Rebuild a LabelPath from decoded_path.csv."""
    _, rows = _read_rows(data, ["t_s", "state"])
    return LabelPath(
        times=np.array([float(r[0]) for r in rows]),
        states=np.array([int(r[1]) for r in rows], dtype=np.int64),
    )


def encode_charge_trace(trace: ChargeTrace) -> bytes:
    """charge_trace_<T>mK.csv: t_s, q_e, temperature_K, truth_label."""
    labels = trace.truth_labels
    rows = (
        [t, q, trace.temperature, "" if labels is None else _num(labels[k])]
        for k, (t, q) in enumerate(zip(trace.times, trace.q))
    )
    return _write_rows(["t_s", "q_e", "temperature_K", "truth_label"], rows)


def decode_charge_trace(data: bytes) -> ChargeTrace:
    """Rebuild a ChargeTrace from its CSV."""
    _, rows = _read_rows(data, ["t_s", "q_e", "temperature_K", "truth_label"])
    if not rows:
        raise DataError("Charge trace CSV has no samples")
    labels = [r[3] for r in rows]
    return ChargeTrace(
        times=np.array([float(r[0]) for r in rows]),
        q=np.array([float(r[1]) for r in rows]),
        temperature=float(rows[0][2]),
        truth_labels=(
            np.array([int(v) for v in labels], dtype=np.int64) if all(labels) else None
        ),
    )


# spectra


def encode_psd(psd: PsdEstimate) -> bytes:
    """psd_*.csv: f_hz, s_value."""
    return _write_rows(["f_hz", "s_value"], zip(psd.frequencies, psd.values))


def decode_psd(data: bytes, method: PsdMethod = PsdMethod.SEGMENT_AVERAGED) -> PsdEstimate:
    """Rebuild a PsdEstimate from its CSV."""
    _, rows = _read_rows(data, ["f_hz", "s_value"])
    return PsdEstimate(
        frequencies=np.array([float(r[0]) for r in rows]),
        values=np.array([float(r[1]) for r in rows]),
        method=method,
    )


# classification reports


MODEL_SELECTION_HEADER = (
    "order",
    "silhouette",
    "train_test_distance",
    "bic",
    "bic_gradient",
    "valid",
)


def encode_model_selection(report: ModelSelectionReport) -> bytes:
    """model_selection.csv: one row per candidate order."""
    rows = ([row[key] for key in MODEL_SELECTION_HEADER] for row in report.rows())
    return _write_rows(MODEL_SELECTION_HEADER, rows)


def decode_model_selection(data: bytes) -> list[dict[str, float | int | bool]]:
    """Return the rows of model_selection.csv."""
    _, rows = _read_rows(data, MODEL_SELECTION_HEADER)
    return [
        {
            "order": int(r[0]),
            "silhouette": float(r[1]),
            "train_test_distance": float(r[2]),
            "bic": float(r[3]),
            "bic_gradient": float(r[4]),
            "valid": r[5] == "true",
        }
        for r in rows
    ]


def encode_transition_matrix(matrix: TransitionMatrix) -> bytes:
    """transition_<T>mK.csv: from_state, p_0 ... p_{n-1}, count."""
    n = matrix.n_states
    header = ["from_state"] + [f"p_{j}" for j in range(n)] + ["count"]
    rows = (
        [i, *matrix.probabilities[i], int(matrix.counts[i].sum())] for i in range(n)
    )
    return _write_rows(header, rows)


def decode_transition_matrix(data: bytes) -> tuple[NDArray[np.float64], NDArray[np.int64]]:
    """Return (probabilities, row visit counts) from a transition CSV."""
    _, rows = _read_rows(data, ["from_state"])
    probabilities = np.array([[float(v) for v in r[1:-1]] for r in rows])
    counts = np.array([int(r[-1]) for r in rows], dtype=np.int64)
    return probabilities, counts


# fields


def encode_grid(values: NDArray[np.float64]) -> bytes:
    """Flat little-endian float64 grid in C order."""
    return np.ascontiguousarray(values, dtype=GRID_DTYPE).tobytes(order="C")


def grid_header(charge_map: InducedChargeMap, geom: GridGeometry) -> dict[str, Any]:
    """JSON header describing a flat binary grid."""
    return {
        "format_version": FORMAT_VERSION,
        "geometry": geom.name,
        "dims": list(charge_map.values.shape),
        "spacing_m": charge_map.spacing,
        "z_surface_index": charge_map.z_surface_index,
        "dtype": GRID_DTYPE,
        "order": "C",
        "combination": dict(charge_map.combination),
    }


def decode_grid(data: bytes, header: Mapping[str, Any]) -> NDArray[np.float64]:
    """Rebuild a grid from its bytes and JSON header."""
    dims = tuple(int(d) for d in header["dims"])
    values = np.frombuffer(data, dtype=np.dtype(header["dtype"]))
    if values.size != int(np.prod(dims)):
        raise DataError(f"Grid holds {values.size} values, header expects {dims}")
    return values.reshape(dims, order=header.get("order", "C")).astype(np.float64)


def encode_grid_slice(charge_map: InducedChargeMap, geom: GridGeometry) -> bytes:
    """x, y, z, value over the y = 0 plane."""
    x, y, z = geom.axes()
    j = geom.shape[1] // 2
    rows = (
        [x[i], y[j], z[k], charge_map.values[i, j, k]]
        for i in range(geom.shape[0])
        for k in range(geom.shape[2])
    )
    return _write_rows(["x_m", "y_m", "z_m", "value"], rows)


def decode_grid_slice(data: bytes) -> NDArray[np.float64]:
    """Return the slice rows as an (n, 4) array."""
    _, rows = _read_rows(data, ["x_m", "y_m", "z_m", "value"])
    return np.array([[float(v) for v in r] for r in rows])


# tables


def encode_table(header: Sequence[str], rows: Iterable[Mapping[str, Any]]) -> bytes:
    """Generic CSV from dict rows; strings are written verbatim."""
    return _write_rows(header, ([row.get(key, "") for key in header] for row in rows))


def decode_table(data: bytes) -> list[dict[str, str]]:
    """Return generic CSV rows as string dictionaries."""
    header, rows = _read_rows(data)
    return [dict(zip(header, r)) for r in rows]
