"""Time stepping of the diffusive system (eps > 0) with Robin oxygen boundary conditions."""

from __future__ import annotations

import logging

import numpy as np

from .grid import FieldState, InitialData, ModelParams, RadialGrid, check_compatibility
from .records import Recorder, TrajectoryRecord
from .scheme import (
    SchemeConfig,
    SolverError,
    StepReport,
    cfl_dt,
    coupled_step,
    finalize_step,
)

logger = logging.getLogger(__name__)


def step_eps(
    state: FieldState,
    params: ModelParams,
    cfg: SchemeConfig,
    grid: RadialGrid,
    dt: float | None = None,
) -> tuple[FieldState, StepReport]:
    """Advance (w, c) by one step of length ``dt`` (default ``params.dt``).

    eps = 0 is accepted for code-path testing only; the oxygen diffusion then
    drops out together with the Robin closure.
    """
    if state.w.shape != (grid.num_nodes,):
        raise ValueError("state does not live on this grid")
    dt = params.dt if dt is None else float(dt)
    step = coupled_step(state, dt, params, cfg, grid)
    return finalize_step(state, step, dt, params, cfg, grid)


def next_target_time(
    k: int, state: FieldState, params: ModelParams, cfg: SchemeConfig, grid: RadialGrid
) -> float:
    """Target time of step k (fixed schedule) or adaptive CFL step."""
    if cfg.adaptive_dt:
        dt = min(params.dt, cfl_dt(state.c, grid, cfg))
        target = state.t + dt
    else:
        target = (k + 1) * params.dt
    if params.t_final - target < 1e-9 * params.dt:
        target = params.t_final
    return target


def run_eps(
    init: InitialData,
    params: ModelParams,
    cfg: SchemeConfig,
    grid: RadialGrid,
    snapshot_stride: int = 1,
    check: bool = True,
) -> TrajectoryRecord:
    """Integrate to ``params.t_final``, storing snapshots every ``snapshot_stride`` steps."""
    if check and params.eps > 0.0:
        report = check_compatibility(init, params, grid)
        if not report.ok:
            raise ValueError("initial data violate compatibility:\n" + "\n".join(report.lines()))
    rec = Recorder(grid, snapshot_stride)
    state = init.state()
    rec.diagnostics(state, 0.0, 0, 0)
    rec.snapshot(0, state)
    k = 0
    t_end = params.t_final
    while state.t < t_end:
        target = next_target_time(k, state, params, cfg, grid)
        try:
            new, rep = step_eps(state, params, cfg, grid, dt=target - state.t)
        except SolverError as exc:
            logger.error("eps run failed at t=%.6g: %s", state.t, exc)
            raise
        state = FieldState(new.w, new.c, target)
        k += 1
        rec.diagnostics(state, rep.dt_used, rep.picard_iters, rep.clamp_events)
        if k % snapshot_stride == 0:
            rec.snapshot(k, state)
    rec.snapshot(k, state)
    logger.debug("eps=%g finished in %d steps", params.eps, k)
    return rec.build("eps", params, init, final=state)


def mass_drift(record: TrajectoryRecord) -> float:
    """Largest relative deviation of the discrete mass from its initial value."""
    m = record.diagnostics["mass"]
    ref = max(abs(m[0]), 1e-300)
    return float(np.max(np.abs(m - m[0])) / ref) if m[0] != 0.0 else float(np.max(np.abs(m)))
