"""The eps = 0 limit: parabolic bacteria equation coupled to the pointwise ODE c_t = -w c.

Besides the fields, the state carries the wall histories of int w and int w*c,
which give the oxygen wall value and wall gradient in closed form.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .eps_solver import next_target_time
from .grid import FieldState, InitialData, ModelParams, RadialGrid
from .records import Recorder, TrajectoryRecord
from .scheme import SchemeConfig, SolverError, coupled_step, finalize_step

logger = logging.getLogger(__name__)

ENDPOINTS = ("a", "b")


@dataclass(frozen=True)
class LimitState:
    w0_field: np.ndarray
    c0_field: np.ndarray
    t: float
    c_init_a: float
    c_init_b: float
    int_w_a: float = 0.0
    int_w_b: float = 0.0
    int_wc_a: float = 0.0
    int_wc_b: float = 0.0

    @classmethod
    def from_initial(cls, init: InitialData) -> "LimitState":
        return cls(
            np.array(init.w0), np.array(init.c0), 0.0, float(init.c0[0]), float(init.c0[-1])
        )

    def fields(self) -> FieldState:
        return FieldState(self.w0_field, self.c0_field, self.t)

    def accumulators(self, endpoint: str) -> tuple[float, float, float]:
        """(initial c, int w, int w*c) at the given wall."""
        if endpoint == "a":
            return self.c_init_a, self.int_w_a, self.int_wc_a
        if endpoint == "b":
            return self.c_init_b, self.int_w_b, self.int_wc_b
        raise ValueError(f"endpoint must be 'a' or 'b', got {endpoint!r}")


def _limit_params(params: ModelParams) -> ModelParams:
    return params if params.eps == 0.0 else params.with_eps(0.0)


def step_limit(
    state: LimitState,
    params: ModelParams,
    cfg: SchemeConfig,
    grid: RadialGrid,
    dt: float | None = None,
) -> LimitState:
    """One step: c <- c * exp(-dt * wbar) with wbar the old/new average, then w.

    Wall accumulators advance by the trapezoid rule; the int-w accumulator
    uses the very average that entered the exponential, so the stepped wall
    value equals c0 * exp(-int w) up to round-off.
    """
    lp = _limit_params(params)
    dt = lp.dt if dt is None else float(dt)
    fs = state.fields()
    step = coupled_step(fs, dt, lp, cfg, grid)
    new, _ = finalize_step(fs, step, dt, lp, cfg, grid)
    w_old, c_old = fs.w, fs.c
    w, c = new.w, new.c
    return LimitState(
        w,
        c,
        state.t + dt,
        state.c_init_a,
        state.c_init_b,
        state.int_w_a + dt * float(step.w_avg[0]),
        state.int_w_b + dt * float(step.w_avg[-1]),
        state.int_wc_a + 0.5 * dt * (w_old[0] * c_old[0] + w[0] * c[0]),
        state.int_wc_b + 0.5 * dt * (w_old[-1] * c_old[-1] + w[-1] * c[-1]),
    )


def limit_boundary_c(state: LimitState, endpoint: str) -> float:
    """c0(endpoint) * exp(-int_0^t w0(endpoint) dt), from the stored history."""
    c_init, int_w, _ = state.accumulators(endpoint)
    return c_init * math.exp(-int_w)


def limit_boundary_cr(state: LimitState, endpoint: str, params: ModelParams) -> float:
    """Closed-form wall gradient: -/+ kappa (lam - c0) exp(-int (w c + w)) at a / b."""
    c_init, int_w, int_wc = state.accumulators(endpoint)
    sign = -1.0 if endpoint == "a" else 1.0
    return sign * params.kappa * (params.lam - c_init) * math.exp(-(int_wc + int_w))


def run_limit(
    init: InitialData,
    params: ModelParams,
    cfg: SchemeConfig,
    grid: RadialGrid,
    snapshot_stride: int = 1,
) -> TrajectoryRecord:
    """Integrate the limit system; snapshots also carry the analytic wall values.

    The per-step diagnostics include the wall series (w, c at a and b) and
    the accumulators, so the history integrals can be re-derived by
    independent quadrature.
    """
    lp = _limit_params(params)
    rec = Recorder(grid, snapshot_stride)
    state = LimitState.from_initial(init)

    def walls(s: LimitState) -> dict[str, float]:
        return {
            "w_a": float(s.w0_field[0]),
            "w_b": float(s.w0_field[-1]),
            "c_a": float(s.c0_field[0]),
            "c_b": float(s.c0_field[-1]),
            "int_w_a": s.int_w_a,
            "int_w_b": s.int_w_b,
            "int_wc_a": s.int_wc_a,
            "int_wc_b": s.int_wc_b,
        }

    def analytic(s: LimitState) -> dict[str, float]:
        out = walls(s)
        out.update(
            c_exact_a=limit_boundary_c(s, "a"),
            c_exact_b=limit_boundary_c(s, "b"),
            cr_exact_a=limit_boundary_cr(s, "a", params),
            cr_exact_b=limit_boundary_cr(s, "b", params),
        )
        return out

    rec.diagnostics(state.fields(), 0.0, 0, 0, **walls(state))
    rec.snapshot(0, state.fields(), **analytic(state))
    k = 0
    while state.t < lp.t_final:
        target = next_target_time(k, state.fields(), lp, cfg, grid)
        try:
            new = step_limit(state, lp, cfg, grid, dt=target - state.t)
        except SolverError as exc:
            logger.error("limit run failed at t=%.6g: %s", state.t, exc)
            raise
        dt_used = target - state.t
        state = LimitState(
            new.w0_field,
            new.c0_field,
            target,
            new.c_init_a,
            new.c_init_b,
            new.int_w_a,
            new.int_w_b,
            new.int_wc_a,
            new.int_wc_b,
        )
        k += 1
        rec.diagnostics(state.fields(), dt_used, 0, 0, **walls(state))
        if k % snapshot_stride == 0:
            rec.snapshot(k, state.fields(), **analytic(state))
    rec.snapshot(k, state.fields(), **analytic(state))
    return rec.build("limit", params, init, final=state)
