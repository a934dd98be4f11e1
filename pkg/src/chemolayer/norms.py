"""Discrete norms and the entropy functional."""

from __future__ import annotations

import enum

import numpy as np

from .grid import (
    FieldState,
    RadialGrid,
    first_derivative,
    plain_integral,
    second_derivative,
    weighted_integral,
)

W_LOG_W_FLOOR = 1.0e-300


class NormKind(enum.Enum):
    SUP_C = "SupC"
    L2 = "L2"
    H1 = "H1"
    H2 = "H2"
    WEIGHTED_L2 = "WeightedL2"
    WEIGHTED_H1 = "WeightedH1"

    @classmethod
    def parse(cls, tag: "str | NormKind") -> "NormKind":
        if isinstance(tag, cls):
            return tag
        for kind in cls:
            if kind.value.lower() == str(tag).lower() or kind.name.lower() == str(tag).lower():
                return kind
        raise ValueError(f"unknown norm kind {tag!r}")


def discrete_norm(values: np.ndarray, grid: RadialGrid, kind: "NormKind | str") -> float:
    """SupC, L2/H1/H2 (unweighted) or their r**(n-1)-weighted L2/H1 variants.

    H1 and H2 are the usual Sobolev norms built from the L2 norms of the
    first and second differences; trapezoid quadrature throughout.
    """
    kind = NormKind.parse(kind)
    v = np.asarray(values, dtype=np.float64)
    if v.shape != (grid.num_nodes,):
        raise ValueError(f"expected {grid.num_nodes} nodal values, got shape {v.shape}")
    if kind is NormKind.SUP_C:
        return float(np.max(np.abs(v)))
    if kind is NormKind.H2 and grid.num_nodes < 5:
        raise ValueError("H2 norm needs at least 5 nodes")
    weighted = kind in (NormKind.WEIGHTED_L2, NormKind.WEIGHTED_H1)
    integrate = weighted_integral if weighted else plain_integral
    total = integrate(v * v, grid)
    if kind in (NormKind.H1, NormKind.H2, NormKind.WEIGHTED_H1):
        d1 = first_derivative(v, grid)
        total += integrate(d1 * d1, grid)
    if kind is NormKind.H2:
        d2 = second_derivative(v, grid)
        total += plain_integral(d2 * d2, grid)
    return float(np.sqrt(total))


def entropy_functional(state: FieldState, grid: RadialGrid, sqrt_c_weight: float = 1.0) -> float:
    """Weighted integral of (w log w - w + 1) plus ``sqrt_c_weight`` times that of (d_r sqrt c)^2.

    With ``sqrt_c_weight=2`` this is the combination whose time derivative
    is nonpositive when kappa = 0.
    """
    w = np.asarray(state.w, dtype=np.float64)
    c = np.asarray(state.c, dtype=np.float64)
    if np.any(c <= 0.0):
        raise ValueError("entropy functional needs c > 0 at every node")
    if np.any(w < 0.0):
        raise ValueError("entropy functional needs w >= 0 at every node")
    wlogw = np.zeros_like(w)
    pos = w >= W_LOG_W_FLOOR
    wlogw[pos] = w[pos] * np.log(w[pos])
    part_w = weighted_integral(wlogw - w + 1.0, grid)
    g = first_derivative(np.sqrt(c), grid)
    return part_w + sqrt_c_weight * weighted_integral(g * g, grid)
