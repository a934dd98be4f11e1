"""Initial-data presets.

Every analytic preset satisfies the zero-flux and Robin compatibility
conditions exactly, so the residuals reported by ``check_compatibility`` are
pure stencil error.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .grid import InitialData, ModelParams, RadialGrid

PRESETS = ("cosine_bump", "neumann_pair", "zero_bacteria", "robin_deficit")


def _cos_profile(grid: RadialGrid) -> np.ndarray:
    return np.cos(np.pi * (grid.r - grid.a) / (grid.b - grid.a))


def robin_shape(grid: RadialGrid, kappa: float) -> np.ndarray:
    """Quadratic phi with phi(a)=phi(b)=1, phi'(a)=kappa*phi(a), phi'(b)=-kappa*phi(b)."""
    x = grid.r - grid.a
    length = grid.b - grid.a
    return 1.0 + kappa * x - kappa * x**2 / length


def load_profile_table(path: str | Path) -> np.ndarray:
    """Read ``r w0 c0`` rows (whitespace separated, '#' comments) into an (M, 3) array."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 3:
                raise ValueError(f"{path}:{lineno}: expected 3 columns, got {len(parts)}")
            rows.append([float(p) for p in parts])
    if len(rows) < 2:
        raise ValueError(f"{path}: need at least two rows")
    table = np.array(rows, dtype=np.float64)
    if np.any(np.diff(table[:, 0]) <= 0.0):
        raise ValueError(f"{path}: rows must be sorted strictly ascending in r")
    return table


def make_preset(
    name: str,
    grid: RadialGrid,
    params: ModelParams,
    amp: float = 1.0,
    bump: float = 0.5,
    deficit: float = 0.5,
) -> InitialData:
    """Build initial data on ``grid``.

    ``amp``/``bump`` are the constant and cosine amplitudes of w0 (amp > bump >= 0
    keeps w0 > 0); ``deficit`` in (0, 1) sets the interior oxygen drop of
    ``robin_deficit``, whose w0 is amp*exp(c0 - max c0) so that the zero-flux
    condition holds with a sloped c0.  amp=0 gives a bacteria-free Robin state.
    """
    lam = params.lam
    if name == "cosine_bump":
        w0 = amp + bump * _cos_profile(grid)
        c0 = np.full(grid.num_nodes, lam)
    elif name == "neumann_pair":
        prof = _cos_profile(grid)
        w0 = amp + bump * prof
        c0 = lam * (1.0 + 0.5 * prof)
    elif name == "zero_bacteria":
        w0 = np.zeros(grid.num_nodes)
        c0 = np.full(grid.num_nodes, lam)
    elif name == "robin_deficit":
        if not (0.0 < deficit < 1.0):
            raise ValueError("deficit must lie in (0, 1)")
        phi = robin_shape(grid, params.kappa)
        c0 = lam * (1.0 - deficit * phi / phi.max())
        w0 = amp * np.exp(c0 - c0.max())
    elif name.startswith("file:"):
        path = name[len("file:") :]
        table = load_profile_table(path)
        r_tab = table[:, 0]
        span = 1e-12 * (grid.b - grid.a)
        if r_tab[0] > grid.a + span or r_tab[-1] < grid.b - span:
            raise ValueError(
                f"{path}: rows cover [{r_tab[0]}, {r_tab[-1]}], need [{grid.a}, {grid.b}]"
            )
        w0 = np.interp(grid.r, r_tab, table[:, 1])
        c0 = np.interp(grid.r, r_tab, table[:, 2])
    else:
        raise ValueError(f"unknown preset {name!r}; choose from {PRESETS} or 'file:<path>'")
    return InitialData(w0, c0, name)
