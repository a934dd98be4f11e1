"""CSV / JSON persistence.  Floats are written with 17 significant digits so files round-trip exactly."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .records import DIAGNOSTIC_COLUMNS, TrajectoryRecord

FLOAT_FMT = "%.17g"


def fmt(x: float) -> str:
    return FLOAT_FMT % float(x)


def write_snapshots(record: TrajectoryRecord, path: str | Path) -> Path:
    """``t,r,w,c`` rows, one per node per stored time."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    r = record.grid.r
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write("t,r,w,c\n")
        for k, t in enumerate(record.times):
            ts = fmt(t)
            for i in range(r.size):
                fh.write(f"{ts},{fmt(r[i])},{fmt(record.w[k, i])},{fmt(record.c[k, i])}\n")
    return path


def read_snapshots(path: str | Path) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Inverse of ``write_snapshots``: (times, r, w[S, N], c[S, N])."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    times = np.unique(data[:, 0])
    n_nodes = data.shape[0] // times.size
    if n_nodes * times.size != data.shape[0]:
        raise ValueError(f"{path}: ragged snapshot table")
    shaped = data.reshape(times.size, n_nodes, 4)
    return shaped[:, 0, 0], shaped[0, :, 1], shaped[:, :, 2], shaped[:, :, 3]


def write_table(path: str | Path, columns: Sequence[str], rows: Iterable[Sequence[float]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([fmt(v) if isinstance(v, (float, np.floating, int)) else v for v in row])
    return path


def read_table(path: str | Path) -> dict[str, np.ndarray]:
    with open(path, encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(x) for x in row] for row in reader]
    arr = np.array(rows, dtype=np.float64).reshape(-1, len(header))
    return {name: arr[:, j] for j, name in enumerate(header)}


def write_diagnostics(record: TrajectoryRecord, path: str | Path) -> Path:
    cols = list(DIAGNOSTIC_COLUMNS) + sorted(
        k for k in record.diagnostics if k not in DIAGNOSTIC_COLUMNS
    )
    n = record.diagnostics["t"].size
    rows = ([record.diagnostics[c][i] for c in cols] for i in range(n))
    return write_table(path, cols, rows)


def _jsonable(obj):
    if isinstance(obj, Mapping):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    return obj


def write_json(path: str | Path, payload) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path
