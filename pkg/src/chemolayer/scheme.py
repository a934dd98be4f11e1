"""Discrete operators and the per-step kernels shared by the eps and limit solvers.

Both solvers advance one step the same way: oxygen first (exact exponential
for the uptake term, then, for eps > 0, implicit Robin diffusion), then the
bacteria with the freshly updated oxygen gradient.  The bacteria flux
``w_r - w c_r`` is discretized on the faces with exponentially fitted
(Scharfetter-Gummel) weights and zero flux on the two wall faces, so the
r**(n-1)-weighted trapezoid mass telescopes exactly.  Because the uptake
exponent uses the time average of old and new w, the pair is iterated to a
fixed point (Picard).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, solve_banded

from .grid import FieldState, ModelParams, RadialGrid, first_derivative

logger = logging.getLogger(__name__)

CLAMP_LIMIT = 1.0e-12


class SolverError(RuntimeError):
    """A step could not be completed; ``t`` is the time at the start of the step."""

    def __init__(self, message: str, t: float | None = None):
        super().__init__(message if t is None else f"{message} (t={t:.6g})")
        self.t = t


@dataclass(frozen=True)
class SchemeConfig:
    theta: float = 1.0
    cfl_advect: float = 0.9
    max_picard: int = 50
    tol_picard: float = 1.0e-12
    tol_mass: float = 1.0e-12
    tol_max: float = 1.0e-10
    adaptive_dt: bool = False

    def __post_init__(self) -> None:
        if not (0.5 <= self.theta <= 1.0):
            raise ValueError("theta must lie in [0.5, 1]")
        if not (0.0 < self.cfl_advect <= 1.0):
            raise ValueError("cfl_advect must lie in (0, 1]")
        if self.max_picard < 1:
            raise ValueError("max_picard must be >= 1")


@dataclass(frozen=True)
class StepReport:
    dt_used: float
    mass_before: float
    mass_after: float
    c_min: float
    c_max: float
    picard_iters: int
    clamp_events: int = 0


def cfl_dt(c: np.ndarray, grid: RadialGrid, cfg: SchemeConfig) -> float:
    """Default step: min(cfl * dr / max(|c_r| + dr), dr)."""
    h = grid.spacing
    denom = float(np.max(np.abs(first_derivative(c, grid)) + h))
    return min(cfg.cfl_advect * h / denom, h)


def bernoulli(x: np.ndarray) -> np.ndarray:
    """B(x) = x / (exp(x) - 1) with B(0) = 1."""
    x = np.asarray(x, dtype=np.float64)
    out = np.ones_like(x)
    big = np.abs(x) > 1e-8
    out[big] = x[big] / np.expm1(x[big])
    small = ~big
    out[small] = 1.0 - 0.5 * x[small]
    return out


# ---------------------------------------------------------------- tridiagonal


@dataclass(frozen=True)
class Tridiag:
    """Rows ``lower[i]*x[i-1] + diag[i]*x[i] + upper[i]*x[i+1]``; lower[0]=upper[-1]=0."""

    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray

    def matvec(self, x: np.ndarray) -> np.ndarray:
        y = self.diag * x
        y[1:] += self.lower[1:] * x[:-1]
        y[:-1] += self.upper[:-1] * x[1:]
        return y

    def dense(self) -> np.ndarray:
        n = self.diag.size
        m = np.diag(self.diag)
        m[np.arange(1, n), np.arange(n - 1)] = self.lower[1:]
        m[np.arange(n - 1), np.arange(1, n)] = self.upper[:-1]
        return m

    def shifted(self, mass: np.ndarray, scale: float) -> "Tridiag":
        """mass - scale * self, with ``mass`` a diagonal."""
        return Tridiag(-scale * self.lower, mass - scale * self.diag, -scale * self.upper)

    def solve(self, rhs: np.ndarray, t: float | None = None) -> np.ndarray:
        n = self.diag.size
        ab = np.zeros((3, n))
        ab[0, 1:] = self.upper[:-1]
        ab[1] = self.diag
        ab[2, :-1] = self.lower[1:]
        try:
            x = solve_banded((1, 1), ab, rhs, check_finite=False)
        except LinAlgError as exc:
            raise SolverError(f"tridiagonal solve failed: {exc}", t) from exc
        if not np.all(np.isfinite(x)):
            raise SolverError("tridiagonal solve produced non-finite values", t)
        return x


def _check_dominance(mat: Tridiag, by: str, t: float | None) -> None:
    off = np.abs(mat.lower) + np.abs(mat.upper)
    if by == "row":
        ok = np.all(mat.diag >= off * (1.0 - 1e-14))
    else:
        col = np.zeros_like(mat.diag)
        col[:-1] += np.abs(mat.lower[1:])
        col[1:] += np.abs(mat.upper[:-1])
        ok = np.all(mat.diag >= col * (1.0 - 1e-14))
    if not ok:
        raise SolverError(f"implicit matrix is not {by}-diagonally dominant; reduce dt", t)


# ----------------------------------------------------------- spatial operators


def flux_operator(c: np.ndarray, grid: RadialGrid) -> Tridiag:
    """Matrix A with (A w)_i = G_{i+1/2} - G_{i-1/2} for G ~ r^(n-1) (w_r - w c_r).

    Wall faces carry G = 0, so every column of A sums to zero.
    """
    h = grid.spacing
    s = grid.face_weight / h
    dc = np.diff(c)
    bp = bernoulli(dc)  # weight of w_{i+1} in G_{i+1/2}
    bm = bp + dc  # B(-x) = B(x) + x: weight of w_i
    n = grid.num_nodes
    lower = np.zeros(n)
    upper = np.zeros(n)
    diag = np.zeros(n)
    upper[:-1] = s * bp
    lower[1:] = s * bm
    diag[:-1] -= s * bm
    diag[1:] -= s * bp
    return Tridiag(lower, diag, upper)


def robin_diffusion_operator(
    grid: RadialGrid, kappa: float, lam: float
) -> tuple[Tridiag, np.ndarray]:
    """r^(1-n) (r^(n-1) c_r)_r with ghost nodes realizing the Robin conditions.

    Ghost values c_{-1} = c_1 + 2h kappa (lam - c_0) and
    c_N = c_{N-2} + 2h kappa (lam - c_{N-1}) reproduce c_r(a) = -kappa (lam - c(a))
    and c_r(b) = kappa (lam - c(b)) with centered differences.  Returns the
    matrix part and the constant source vector.
    """
    h = grid.spacing
    n = grid.num_nodes
    p = grid.n_dim - 1
    s = grid.face_weight
    s_lo = (grid.a - 0.5 * h) ** p
    s_hi = (grid.b + 0.5 * h) ** p
    inv = 1.0 / (grid.weight * h * h)
    lower = np.zeros(n)
    upper = np.zeros(n)
    diag = np.zeros(n)
    upper[1:-1] = s[1:] * inv[1:-1]
    lower[1:-1] = s[:-1] * inv[1:-1]
    diag[1:-1] = -(s[1:] + s[:-1]) * inv[1:-1]
    upper[0] = (s[0] + s_lo) * inv[0]
    diag[0] = -(s[0] + s_lo + 2.0 * h * kappa * s_lo) * inv[0]
    lower[-1] = (s[-1] + s_hi) * inv[-1]
    diag[-1] = -(s[-1] + s_hi + 2.0 * h * kappa * s_hi) * inv[-1]
    source = np.zeros(n)
    source[0] = 2.0 * h * kappa * lam * s_lo * inv[0]
    source[-1] = 2.0 * h * kappa * lam * s_hi * inv[-1]
    return Tridiag(lower, diag, upper), source


# ------------------------------------------------------------------ kernels


def update_oxygen(
    c_old: np.ndarray,
    w_avg: np.ndarray,
    dt: float,
    params: ModelParams,
    cfg: SchemeConfig,
    grid: RadialGrid,
    t: float | None = None,
) -> np.ndarray:
    """Uptake by the exact factor exp(-dt*w_avg), then theta-implicit diffusion."""
    c_star = c_old * np.exp(-dt * w_avg)
    if params.eps == 0.0:
        return c_star
    op, src = robin_diffusion_operator(grid, params.kappa, params.lam)
    k = dt * params.eps
    mat = op.shifted(np.ones(grid.num_nodes), cfg.theta * k)
    _check_dominance(mat, "row", t)
    rhs = c_star + k * src
    if cfg.theta < 1.0:
        rhs = rhs + (1.0 - cfg.theta) * k * op.matvec(c_star)
    return mat.solve(rhs, t)


def update_bacteria(
    w_old: np.ndarray,
    c_old: np.ndarray,
    c_new: np.ndarray,
    dt: float,
    cfg: SchemeConfig,
    grid: RadialGrid,
    t: float | None = None,
) -> np.ndarray:
    """Solve (M - theta dt A(c_new)) w = M w_old + (1-theta) dt A(c_old) w_old."""
    vol = grid.quadrature_weights
    a_new = flux_operator(c_new, grid)
    mat = a_new.shifted(vol, cfg.theta * dt)
    _check_dominance(mat, "col", t)
    rhs = vol * w_old
    if cfg.theta < 1.0:
        rhs = rhs + (1.0 - cfg.theta) * dt * flux_operator(c_old, grid).matvec(w_old)
    return mat.solve(rhs, t)


@dataclass(frozen=True)
class CoupledStep:
    w: np.ndarray
    c: np.ndarray
    w_avg: np.ndarray
    iters: int


def coupled_step(
    state: FieldState,
    dt: float,
    params: ModelParams,
    cfg: SchemeConfig,
    grid: RadialGrid,
) -> CoupledStep:
    """Picard iteration on the pair (c then w) until w stops changing."""
    w_old, c_old = state.w, state.c
    w_guess = w_old
    for it in range(1, cfg.max_picard + 1):
        w_avg = 0.5 * (w_old + w_guess)
        c_new = update_oxygen(c_old, w_avg, dt, params, cfg, grid, state.t)
        w_new = update_bacteria(w_old, c_old, c_new, dt, cfg, grid, state.t)
        change = float(np.max(np.abs(w_new - w_guess)))
        scale = max(1.0, float(np.max(np.abs(w_new))))
        if change <= cfg.tol_picard * scale:
            return CoupledStep(w_new, c_new, w_avg, it)
        w_guess = w_new
    raise SolverError(
        f"Picard iteration did not converge in {cfg.max_picard} iterations "
        f"(last change {change:.3e})",
        state.t,
    )


def finalize_step(
    state: FieldState,
    step: CoupledStep,
    dt: float,
    params: ModelParams,
    cfg: SchemeConfig,
    grid: RadialGrid,
) -> tuple[FieldState, StepReport]:
    """Clamp round-off negatives of w, check the discrete invariants, build the report."""
    w = step.w.copy()
    c = step.c
    neg = w < 0.0
    clamps = int(np.count_nonzero(neg))
    if clamps:
        worst = float(-w[neg].min())
        if worst > CLAMP_LIMIT * max(1.0, float(np.abs(w).max())):
            raise SolverError(f"bacterial density went negative ({-worst:.3e})", state.t)
        w[neg] = 0.0
    vol = grid.quadrature_weights
    mass_before = float(np.dot(vol, state.w))
    mass_after = float(np.dot(vol, w))
    drift = abs(mass_after - mass_before)
    if drift > cfg.tol_mass * max(mass_before, 1e-300) and drift > 1e-300:
        raise SolverError(f"mass drift {drift:.3e} exceeds tolerance", state.t)
    c_min, c_max = float(c.min()), float(c.max())
    cap = max(float(state.c.max()), params.lam)
    if c_min < -cfg.tol_max or c_max > cap + cfg.tol_max * max(1.0, cap):
        raise SolverError(
            f"oxygen left [0, {cap:.6g}]: min {c_min:.3e}, max {c_max:.17g}", state.t
        )
    new_state = FieldState(w, c, state.t + dt)
    report = StepReport(dt, mass_before, mass_after, c_min, c_max, step.iters, clamps)
    return new_state, report
