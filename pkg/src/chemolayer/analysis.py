"""Turning trajectories into checkable numbers: errors, monitors, layer diagnostics, rates."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grid import (
    ModelParams,
    RadialGrid,
    first_derivative,
    plain_integral,
    second_derivative,
    third_derivative_interior,
)
from .limit_solver import LimitState
from .norms import NormKind, discrete_norm, entropy_functional  # noqa: F401  (re-export)
from .records import TrajectoryRecord

TOL_POS = 1.0e-10


# ------------------------------------------------------------------ rates


@dataclass(frozen=True)
class RateFit:
    samples: tuple[tuple[float, float], ...]
    slope: float
    intercept: float
    max_residual: float

    def predict(self, eps: float) -> float:
        return math.exp(self.intercept) * eps**self.slope

    def as_dict(self) -> dict:
        return {
            "samples": [list(s) for s in self.samples],
            "slope": self.slope,
            "intercept": self.intercept,
            "max_residual": self.max_residual,
        }


def fit_rate(samples) -> RateFit:
    """Least-squares line through (log eps, log error)."""
    pts = [(float(e), float(v)) for e, v in samples]
    if len(pts) < 2:
        raise ValueError("need at least two (eps, error) samples")
    if any(e <= 0.0 or v <= 0.0 for e, v in pts):
        raise ValueError("eps and error must be positive for a log-log fit")
    x = np.log([p[0] for p in pts])
    y = np.log([p[1] for p in pts])
    if np.ptp(x) == 0.0:
        raise ValueError("need at least two distinct eps values")
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    return RateFit(tuple(pts), float(slope), float(intercept), float(np.max(np.abs(resid))))


# ------------------------------------------------------------ comparisons


def _check_same_grid(rec_a: TrajectoryRecord, rec_b: TrajectoryRecord) -> None:
    if rec_a.grid != rec_b.grid:
        raise ValueError("records live on different grids")
    if rec_a.times.shape != rec_b.times.shape or np.max(np.abs(rec_a.times - rec_b.times)) > 1e-12:
        raise ValueError("records have different snapshot times")


def error_history(
    rec_eps: TrajectoryRecord, rec_lim: TrajectoryRecord, kind: NormKind | str
) -> dict[str, np.ndarray]:
    """Per-snapshot norms of w^eps - w^0 and c^eps - c^0."""
    _check_same_grid(rec_eps, rec_lim)
    g = rec_eps.grid
    dw = rec_eps.w - rec_lim.w
    dc = rec_eps.c - rec_lim.c
    return {
        "w": np.array([discrete_norm(v, g, kind) for v in dw]),
        "c": np.array([discrete_norm(v, g, kind) for v in dc]),
    }


def sup_in_time_error(rec_eps, rec_lim, kind: NormKind | str) -> dict[str, float]:
    hist = error_history(rec_eps, rec_lim, kind)
    return {k: float(v.max()) for k, v in hist.items()}


def interior_gradient_error(
    eps_snap: np.ndarray, limit_snap: np.ndarray, grid: RadialGrid, delta: float
) -> float:
    """max |d_r (u^eps - u^0)| over nodes with r in [a+delta, b-delta].

    delta = 0 gives the full-interval value (one-sided stencils at the walls).
    """
    half = 0.5 * (grid.b - grid.a)
    if not (0.0 <= delta < half):
        raise ValueError(f"delta must lie in [0, {half}), got {delta}")
    d = first_derivative(np.asarray(eps_snap) - np.asarray(limit_snap), grid)
    tol = 1e-12 * (grid.b - grid.a)
    mask = (grid.r >= grid.a + delta - tol) & (grid.r <= grid.b - delta + tol)
    if not np.any(mask):
        raise ValueError("no grid node inside [a+delta, b-delta]")
    return float(np.max(np.abs(d[mask])))


def gradient_error_history(rec_eps, rec_lim, delta: float) -> dict[str, np.ndarray]:
    _check_same_grid(rec_eps, rec_lim)
    g = rec_eps.grid
    return {
        "w": np.array([interior_gradient_error(a, b, g, delta) for a, b in zip(rec_eps.w, rec_lim.w)]),
        "c": np.array([interior_gradient_error(a, b, g, delta) for a, b in zip(rec_eps.c, rec_lim.c)]),
    }


@dataclass(frozen=True)
class BLReport:
    delta: float
    interior_sup_grad_err: dict[str, float]
    full_sup_grad_err: dict[str, float]
    occurrence_flag: bool
    witness_time: float | None = None


def bl_report(rec_eps, rec_lim, delta: float) -> BLReport:
    inner = gradient_error_history(rec_eps, rec_lim, delta)
    full = gradient_error_history(rec_eps, rec_lim, 0.0)
    flag, when = bl_occurrence(rec_lim)
    return BLReport(
        delta,
        {k: float(v.max()) for k, v in inner.items()},
        {k: float(v.max()) for k, v in full.items()},
        flag,
        when,
    )


def bl_occurrence(limit_record: TrajectoryRecord, tol_pos: float = TOL_POS) -> tuple[bool, float | None]:
    """Does the limit density ever become positive on a wall?  Earliest snapshot time if so."""
    walls = np.maximum(limit_record.w[:, 0], limit_record.w[:, -1])
    hits = np.nonzero(walls > tol_pos)[0]
    if hits.size == 0:
        return False, None
    return True, float(limit_record.times[hits[0]])


# ------------------------------------------------------ Robin reduction


def robin_reduction_residual(limit_state: LimitState, endpoint: str, params: ModelParams) -> float:
    """c0 e^{-Iw} (1 - e^{-Iwc}) - lam (1 - e^{-(Iw + Iwc)}) from the wall histories.

    When this vanishes for all t, the wall gradient of c^eps - c^0 obeys a
    homogeneous Robin relation.
    """
    c_init, int_w, int_wc = limit_state.accumulators(endpoint)
    return robin_residual_from_integrals(c_init, int_w, int_wc, params.lam)


def robin_residual_from_integrals(c_init: float, int_w: float, int_wc: float, lam: float) -> float:
    return c_init * math.exp(-int_w) * (-math.expm1(-int_wc)) - lam * (-math.expm1(-(int_w + int_wc)))


# -------------------------------------------------------------- monitors


def _h1_sq(v: np.ndarray, g: RadialGrid) -> float:
    d = first_derivative(v, g)
    return plain_integral(v * v, g) + plain_integral(d * d, g)


def _crrr_sq(v: np.ndarray, g: RadialGrid) -> float:
    q = third_derivative_interior(v, g) ** 2
    return float(g.spacing * (q.sum() - 0.5 * (q[0] + q[-1])))


@dataclass(frozen=True)
class MonitorTable:
    eps: float
    kappa: float
    values: dict[str, float] = field(default_factory=dict)


def uniform_monitor(record_eps: TrajectoryRecord, params: ModelParams | None = None) -> MonitorTable:
    """Discrete surrogates of the squared norms bounded uniformly in eps.

    Time derivatives are finite differences of consecutive snapshots and the
    time integrals are Riemann sums over the snapshot intervals, so the
    snapshot stride bounds their accuracy.  For kappa > 0 the curvature terms
    carry the weights eps^(1/2) and eps^(3/2); for kappa = 0 the weights 1 and
    eps.
    """
    params = record_eps.params if params is None else params
    if record_eps.num_snapshots < 2:
        raise ValueError("uniform_monitor needs at least two snapshots")
    g = record_eps.grid
    t = record_eps.times
    dts = np.diff(t)
    ws, cs = record_eps.w, record_eps.c
    sup_w = max(_h1_sq(v, g) for v in ws)
    sup_c = max(_h1_sq(v, g) for v in cs)
    wt = sum(dt * _h1_sq((ws[k + 1] - ws[k]) / dt, g) for k, dt in enumerate(dts))
    ct = sum(dt * _h1_sq((cs[k + 1] - cs[k]) / dt, g) for k, dt in enumerate(dts))
    crr = max(plain_integral(second_derivative(v, g) ** 2, g) for v in cs)
    crrr_sq = [_crrr_sq(v, g) for v in cs]
    # right-endpoint rule over snapshot intervals
    crrr = float(sum(dt * crrr_sq[k + 1] for k, dt in enumerate(dts)))
    eps = params.eps
    if params.kappa > 0.0:
        w_rr, w_rrr = math.sqrt(eps), eps**1.5
    else:
        w_rr, w_rrr = 1.0, eps
    values = {
        "sup_H1_w": float(sup_w),
        "sup_H1_c": float(sup_c),
        "int_H1_wt": float(wt),
        "int_H1_ct": float(ct),
        "weighted_sup_L2_crr": float(w_rr * crr),
        "weighted_int_L2_crrr": float(w_rrr * crrr),
    }
    return MonitorTable(eps, params.kappa, values)
