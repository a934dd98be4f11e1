"""Radial grid, state containers and the discrete calculus shared by both solvers."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

FloatArray = np.ndarray

TOL_COMPAT = 1.0e-8
TOL_MAX = 1.0e-10


@dataclass(frozen=True)
class RadialGrid:
    """Uniform mesh on [a, b] carrying the radial weight r**(n-1)."""

    a: float
    b: float
    n_dim: int
    num_nodes: int
    r: FloatArray = field(init=False, repr=False, compare=False)
    weight: FloatArray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not (0.0 < self.a < self.b):
            raise ValueError(f"need 0 < a < b, got a={self.a}, b={self.b}")
        if int(self.n_dim) != self.n_dim or self.n_dim < 2:
            raise ValueError(f"n_dim must be an integer >= 2, got {self.n_dim}")
        if int(self.num_nodes) != self.num_nodes or self.num_nodes < 3:
            raise ValueError(f"num_nodes must be an integer >= 3, got {self.num_nodes}")
        object.__setattr__(self, "n_dim", int(self.n_dim))
        object.__setattr__(self, "num_nodes", int(self.num_nodes))
        r = self.a + np.arange(self.num_nodes) * self.spacing
        r[-1] = self.b
        r.setflags(write=False)
        w = r ** (self.n_dim - 1)
        w.setflags(write=False)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "weight", w)

    @property
    def spacing(self) -> float:
        return (self.b - self.a) / (self.num_nodes - 1)

    @property
    def face_weight(self) -> FloatArray:
        """r**(n-1) at the N-1 interior faces r_{i+1/2}."""
        mid = 0.5 * (self.r[:-1] + self.r[1:])
        return mid ** (self.n_dim - 1)

    @property
    def quadrature_weights(self) -> FloatArray:
        """Trapezoid weights of the r**(n-1)-weighted integral (control volumes)."""
        q = self.spacing * self.weight.copy()
        q[0] *= 0.5
        q[-1] *= 0.5
        return q

    def refined(self) -> "RadialGrid":
        """Grid with the spacing halved (every old node kept)."""
        return RadialGrid(self.a, self.b, self.n_dim, 2 * self.num_nodes - 1)

    def coarsened(self) -> "RadialGrid":
        if (self.num_nodes - 1) % 2:
            raise ValueError("coarsening needs an even number of intervals")
        return RadialGrid(self.a, self.b, self.n_dim, (self.num_nodes - 1) // 2 + 1)


@dataclass(frozen=True)
class ModelParams:
    eps: float
    kappa: float
    lam: float
    dt: float
    t_final: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.eps < 1.0):
            raise ValueError(f"eps must lie in [0, 1), got {self.eps}")
        if self.kappa < 0.0:
            raise ValueError(f"kappa must be >= 0, got {self.kappa}")
        if self.lam <= 0.0:
            raise ValueError(f"lambda must be > 0, got {self.lam}")
        if self.dt <= 0.0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if self.t_final < self.dt:
            raise ValueError("t_final must be >= dt")

    def with_eps(self, eps: float) -> "ModelParams":
        return ModelParams(eps, self.kappa, self.lam, self.dt, self.t_final)

    def with_dt(self, dt: float) -> "ModelParams":
        return ModelParams(self.eps, self.kappa, self.lam, dt, self.t_final)


@dataclass(frozen=True)
class FieldState:
    w: FloatArray
    c: FloatArray
    t: float = 0.0

    def __post_init__(self) -> None:
        w = np.array(self.w, dtype=np.float64)
        c = np.array(self.c, dtype=np.float64)
        if w.shape != c.shape or w.ndim != 1:
            raise ValueError("w and c must be 1-D arrays of equal length")
        w.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "c", c)


@dataclass(frozen=True)
class InitialData:
    w0: FloatArray
    c0: FloatArray
    preset_name: str

    def __post_init__(self) -> None:
        w0 = np.array(self.w0, dtype=np.float64)
        c0 = np.array(self.c0, dtype=np.float64)
        if w0.shape != c0.shape or w0.ndim != 1:
            raise ValueError("w0 and c0 must be 1-D arrays of equal length")
        if np.any(w0 < 0.0):
            raise ValueError("initial bacterial density must be nonnegative")
        if np.any(c0 <= 0.0):
            raise ValueError("initial oxygen concentration must be positive")
        w0.setflags(write=False)
        c0.setflags(write=False)
        object.__setattr__(self, "w0", w0)
        object.__setattr__(self, "c0", c0)

    def state(self) -> FieldState:
        return FieldState(self.w0, self.c0, 0.0)


def _check_length(values: FloatArray, grid: RadialGrid) -> FloatArray:
    v = np.asarray(values, dtype=np.float64)
    if v.shape != (grid.num_nodes,):
        raise ValueError(f"expected {grid.num_nodes} nodal values, got shape {v.shape}")
    return v


def weighted_integral(values: FloatArray, grid: RadialGrid) -> float:
    """Trapezoid approximation of the integral of r**(n-1) f(r) over [a, b]."""
    v = _check_length(values, grid)
    return float(np.dot(grid.quadrature_weights, v))


def plain_integral(values: FloatArray, grid: RadialGrid) -> float:
    """Unweighted trapezoid integral over [a, b]."""
    v = _check_length(values, grid)
    h = grid.spacing
    return float(h * (v.sum() - 0.5 * (v[0] + v[-1])))


def first_derivative(values: FloatArray, grid: RadialGrid) -> FloatArray:
    """Central differences inside, second-order one-sided stencils at both walls."""
    f = _check_length(values, grid)
    h = grid.spacing
    d = np.empty_like(f)
    d[1:-1] = (f[2:] - f[:-2]) / (2.0 * h)
    d[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h)
    d[-1] = (3.0 * f[-1] - 4.0 * f[-2] + f[-3]) / (2.0 * h)
    return d


def second_derivative(values: FloatArray, grid: RadialGrid) -> FloatArray:
    f = _check_length(values, grid)
    h2 = grid.spacing**2
    d = np.empty_like(f)
    d[1:-1] = (f[2:] - 2.0 * f[1:-1] + f[:-2]) / h2
    if grid.num_nodes >= 4:
        d[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / h2
        d[-1] = (2.0 * f[-1] - 5.0 * f[-2] + 4.0 * f[-3] - f[-4]) / h2
    else:
        # three nodes: the only available stencil (first order at the walls)
        d[0] = d[1]
        d[-1] = d[1]
    return d


def third_derivative_interior(values: FloatArray, grid: RadialGrid) -> FloatArray:
    """Second difference of central first differences on nodes 2..N-3.

    The wall nodes are skipped on purpose so that no one-sided stencil enters.
    """
    f = _check_length(values, grid)
    if grid.num_nodes < 5:
        raise ValueError("third derivative surrogate needs at least 5 nodes")
    h = grid.spacing
    d1 = (f[2:] - f[:-2]) / (2.0 * h)  # nodes 1..N-2
    return (d1[2:] - 2.0 * d1[1:-1] + d1[:-2]) / h**2  # nodes 2..N-3


def _one_sided_weights(npts: int) -> FloatArray:
    """Weights of the (npts-1)-order forward difference for f'(0) on unit spacing."""
    k = np.arange(npts, dtype=np.float64)
    vander = np.vander(k, npts, increasing=True).T
    rhs = np.zeros(npts)
    rhs[1] = 1.0
    return np.linalg.solve(vander, rhs)


def wall_derivatives(values: FloatArray, grid: RadialGrid) -> tuple[float, float]:
    """High-order one-sided derivatives at r=a and r=b.

    Used for compatibility checks, where the second-order diagnostic stencil
    would leave an O(h^3) truncation residual well above the tolerance.
    """
    f = _check_length(values, grid)
    npts = min(6, grid.num_nodes)
    wts = _one_sided_weights(npts)
    h = grid.spacing
    # differencing against the wall value makes constants exact
    da = float(np.dot(wts[1:], f[1:npts] - f[0]) / h)
    db = float(-np.dot(wts[1:], f[::-1][1:npts] - f[-1]) / h)
    return da, db


@dataclass(frozen=True)
class CompatibilityReport:
    residuals: dict[str, float]
    tol: float

    @property
    def flags(self) -> dict[str, bool]:
        return {k: v <= self.tol for k, v in self.residuals.items()}

    @property
    def ok(self) -> bool:
        return all(self.flags.values())

    def lines(self) -> list[str]:
        return [
            f"{k:<12s} {v:.3e}  {'ok' if v <= self.tol else 'FAIL'}"
            for k, v in self.residuals.items()
        ]


def check_compatibility(
    init: InitialData, params: ModelParams, grid: RadialGrid, tol: float = TOL_COMPAT
) -> CompatibilityReport:
    """Residuals of the zero-flux and Robin compatibility conditions at both walls.

    The Robin residuals are reported only for eps > 0; at eps = 0 no oxygen
    boundary condition is imposed.
    """
    w0 = _check_length(init.w0, grid)
    c0 = _check_length(init.c0, grid)
    dw_a, dw_b = wall_derivatives(w0, grid)
    dc_a, dc_b = wall_derivatives(c0, grid)
    res = {
        "flux_a": abs(dw_a - w0[0] * dc_a),
        "flux_b": abs(dw_b - w0[-1] * dc_b),
    }
    if params.eps > 0.0:
        k, lam = params.kappa, params.lam
        res["robin_a"] = abs(dc_a + k * (lam - c0[0]))
        res["robin_b"] = abs(dc_b - k * (lam - c0[-1]))
    return CompatibilityReport({k: float(v) for k, v in res.items()}, tol)
