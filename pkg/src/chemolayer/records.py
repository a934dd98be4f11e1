from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .grid import FieldState, InitialData, ModelParams, RadialGrid
from .norms import NormKind, discrete_norm, entropy_functional

DIAGNOSTIC_COLUMNS = (
    "t",
    "dt",
    "mass",
    "c_min",
    "c_max",
    "entropy",
    "entropy_lyap",
    "l2_w",
    "h1_w",
    "h1_c",
    "h2_c",
    "picard_iters",
    "clamp_events",
)


def state_diagnostics(state: FieldState, grid: RadialGrid) -> dict[str, float]:
    """Scalar diagnostics of one state (the per-step CSV columns minus step bookkeeping)."""
    return {
        "t": float(state.t),
        "mass": float(np.dot(grid.quadrature_weights, state.w)),
        "c_min": float(state.c.min()),
        "c_max": float(state.c.max()),
        "entropy": entropy_functional(state, grid),
        "entropy_lyap": entropy_functional(state, grid, sqrt_c_weight=2.0),
        "l2_w": discrete_norm(state.w, grid, NormKind.L2),
        "h1_w": discrete_norm(state.w, grid, NormKind.H1),
        "h1_c": discrete_norm(state.c, grid, NormKind.H1),
        "h2_c": discrete_norm(state.c, grid, NormKind.H2)
        if grid.num_nodes >= 5
        else float("nan"),
    }


@dataclass
class TrajectoryRecord:
    """Snapshots of one run plus per-step diagnostic series."""

    kind: str
    grid: RadialGrid
    params: ModelParams
    init: InitialData
    times: np.ndarray
    w: np.ndarray
    c: np.ndarray
    diagnostics: dict[str, np.ndarray]
    extra: dict[str, np.ndarray] = field(default_factory=dict)
    final: Any = None

    @property
    def num_snapshots(self) -> int:
        return int(self.times.size)

    def snapshot(self, k: int) -> FieldState:
        return FieldState(self.w[k], self.c[k], float(self.times[k]))

    def final_state(self) -> FieldState:
        return self.snapshot(self.num_snapshots - 1)


class Recorder:
    """Accumulates snapshots every ``stride`` steps and diagnostics every step."""

    def __init__(self, grid: RadialGrid, stride: int, wall_series: bool = False):
        if stride < 1:
            raise ValueError("snapshot stride must be >= 1")
        self.grid = grid
        self.stride = stride
        self.times: list[float] = []
        self.w: list[np.ndarray] = []
        self.c: list[np.ndarray] = []
        self.rows: dict[str, list[float]] = {k: [] for k in DIAGNOSTIC_COLUMNS}
        self.extra_rows: dict[str, list[float]] = {}
        self.snap_extra: dict[str, list[float]] = {}
        self._last_snapshot_step = -1

    def diagnostics(self, state: FieldState, dt: float, iters: int, clamps: int, **extra: float):
        d = state_diagnostics(state, self.grid)
        d.update(dt=dt, picard_iters=float(iters), clamp_events=float(clamps))
        for k in DIAGNOSTIC_COLUMNS:
            self.rows[k].append(d[k])
        for k, v in extra.items():
            self.extra_rows.setdefault(k, []).append(float(v))

    def snapshot(self, step: int, state: FieldState, **extra: float) -> None:
        if step == self._last_snapshot_step:
            return
        self._last_snapshot_step = step
        self.times.append(float(state.t))
        self.w.append(np.array(state.w))
        self.c.append(np.array(state.c))
        for k, v in extra.items():
            self.snap_extra.setdefault(k, []).append(float(v))

    def build(self, kind: str, params: ModelParams, init: InitialData, final=None) -> TrajectoryRecord:
        diag = {k: np.array(v) for k, v in self.rows.items()}
        diag.update({k: np.array(v) for k, v in self.extra_rows.items()})
        extra = {k: np.array(v) for k, v in self.snap_extra.items()}
        return TrajectoryRecord(
            kind=kind,
            grid=self.grid,
            params=params,
            init=init,
            times=np.array(self.times),
            w=np.array(self.w),
            c=np.array(self.c),
            diagnostics=diag,
            extra=extra,
            final=final,
        )


def step_schedule(params: ModelParams) -> tuple[int, float]:
    """Number of fixed steps reaching t_final and the nominal dt."""
    n = int(np.ceil(params.t_final / params.dt - 1e-9))
    return max(n, 1), params.dt
