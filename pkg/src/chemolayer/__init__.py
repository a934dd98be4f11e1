"""Radial chemotaxis-oxygen solvers with Robin oxygen walls and their eps -> 0 limit."""

from .analysis import (
    BLReport,
    MonitorTable,
    RateFit,
    bl_occurrence,
    bl_report,
    fit_rate,
    interior_gradient_error,
    robin_reduction_residual,
    uniform_monitor,
)
from .eps_solver import run_eps, step_eps
from .grid import (
    CompatibilityReport,
    FieldState,
    InitialData,
    ModelParams,
    RadialGrid,
    check_compatibility,
)
from .limit_solver import LimitState, limit_boundary_c, limit_boundary_cr, run_limit, step_limit
from .norms import NormKind, discrete_norm, entropy_functional
from .presets import PRESETS, make_preset
from .records import TrajectoryRecord
from .scheme import SchemeConfig, SolverError

__version__ = "0.1.0"
