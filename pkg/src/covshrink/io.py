"""File formats: CSV readers/writers and deterministic JSON emission.

JSON numbers are written with 17 significant digits so reports are
byte-identical across runs and faithfully round-trip every float64.
Non-finite floats are encoded as the strings "inf", "-inf", "nan".
"""

from __future__ import annotations

import json
import math

import numpy as np

from .errors import InvalidInputError
from .linalg import as_sym_matrix


def _format_float(x: float) -> str:
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    return format(x, ".17g")


def _emit(obj, indent: int, pad: str) -> str:
    if obj is None:
        return "null"
    if isinstance(obj, bool) or isinstance(obj, np.bool_):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _format_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        inner = pad + " " * indent
        items = []
        for key, value in obj.items():
            if not isinstance(key, str):
                raise InvalidInputError(f"JSON keys must be strings, got {key!r}")
            items.append(f"{inner}{json.dumps(key)}: {_emit(value, indent, inner)}")
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        inner = pad + " " * indent
        items = [f"{inner}{_emit(v, indent, inner)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    raise InvalidInputError(f"cannot serialize object of type {type(obj).__name__}")


def to_json(obj, indent: int = 2) -> str:
    """Deterministic JSON text (17 significant digits, insertion order)."""
    return _emit(obj, indent, "") + "\n"


def write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(to_json(obj))


def _load_numeric_csv(path, skiprows: int = 0) -> np.ndarray:
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=skiprows, ndmin=2)
    except OSError:
        raise
    except Exception as exc:
        raise InvalidInputError(f"could not parse {path!r} as numeric CSV: {exc}") from exc
    if not np.all(np.isfinite(data)):
        raise InvalidInputError(f"{path!r} contains non-finite values")
    return data


def read_matrix_csv(path) -> np.ndarray:
    """p x p comma-separated reals, no header; validated symmetric."""
    return as_sym_matrix(_load_numeric_csv(path))


def read_samples_csv(path) -> np.ndarray:
    """n x p comma-separated reals, no header; one observation per row."""
    return _load_numeric_csv(path)


def read_labeled_csv(path):
    """Feature columns plus a final integer {0,1} label column."""
    data = _load_numeric_csv(path)
    if data.shape[1] < 2:
        raise InvalidInputError("labeled CSV needs at least one feature column")
    labels = data[:, -1]
    if not np.all(np.isin(labels, (0.0, 1.0))):
        raise InvalidInputError("labels must be 0 or 1")
    return data[:, :-1], labels.astype(int)


def read_returns_csv(path):
    """Header row of asset names, then one row of decimal returns per period."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
    if not header:
        raise InvalidInputError(f"{path!r} is empty")
    names = [name.strip() for name in header.split(",")]
    data = _load_numeric_csv(path, skiprows=1)
    if data.shape[1] != len(names):
        raise InvalidInputError(
            f"{path!r}: header names {len(names)} columns, data has {data.shape[1]}"
        )
    return names, data


def write_matrix_csv(path, matrix) -> None:
    np.savetxt(path, np.asarray(matrix, dtype=float), delimiter=",", fmt="%.17g")


def write_csv_table(path, header, rows) -> None:
    """Plain CSV table; floats at 17 significant digits."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            cells = []
            for value in row:
                if isinstance(value, (float, np.floating)):
                    cells.append(format(float(value), ".17g"))
                else:
                    cells.append(str(value))
            fh.write(",".join(cells) + "\n")
