"""The desk-scale experiments: rates in eps, boundary-layer thickness and dichotomy, eps-uniform monitors.

Each experiment runs the limit solver once and the eps solver once per entry
of ``eps_list`` on the same grid and time levels, reduces every pair to a row
of scalar errors, and turns the rows into pass/fail verdicts against the
thresholds frozen in ``data/defaults.ini``.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import config as config_mod
from .analysis import (
    MonitorTable,
    RateFit,
    bl_occurrence,
    fit_rate,
    gradient_error_history,
    interior_gradient_error,
    sup_in_time_error,
    uniform_monitor,
)
from .eps_solver import mass_drift, run_eps
from .grid import ModelParams, RadialGrid
from .io import write_json, write_table
from .limit_solver import LimitState, limit_boundary_c
from .presets import make_preset
from .records import TrajectoryRecord
from .scheme import SchemeConfig

logger = logging.getLogger(__name__)

EXPERIMENTS = ("rate-kpos", "rate-kzero", "bl-thickness", "no-layer", "monitor")
LAYER_EXPERIMENTS = ("rate-kpos", "bl-thickness")
ZERO_TOL = 1.0e-13

# preset, kappa and preset keyword overrides per experiment
_EXPERIMENT_SETUP = {
    "rate-kpos": ("cosine_bump", 1.0, {}),
    "bl-thickness": ("cosine_bump", 1.0, {}),
    "rate-kzero": ("neumann_pair", 0.0, {}),
    "no-layer": ("robin_deficit", 1.0, {"amp": 0.0}),
    "monitor": ("cosine_bump", 1.0, {}),
}
# second sweep of the monitor experiment
_MONITOR_KZERO = ("neumann_pair", 0.0, {})


@dataclass(frozen=True)
class ExperimentSpec:
    name: str
    eps_list: tuple[float, ...]
    grid: RadialGrid
    params: ModelParams
    preset: str
    scheme: SchemeConfig = SchemeConfig()
    preset_kwargs: dict = field(default_factory=dict)
    output_dir: Path | None = None
    stride: int = 10
    workers: int = 1
    monitor_stride: int = 1
    delta_exponent: float = 0.4

    def validate(self) -> None:
        if self.name not in EXPERIMENTS:
            raise config_mod.ConfigError(f"unknown experiment {self.name!r}; choose from {EXPERIMENTS}")
        eps = np.asarray(self.eps_list, dtype=float)
        if eps.size < 2:
            raise config_mod.ConfigError("eps_list needs at least two values")
        if np.any(eps <= 0.0) or np.any(eps >= 1.0):
            raise config_mod.ConfigError("eps_list values must lie in (0, 1)")
        if np.any(np.diff(eps) >= 0.0):
            raise config_mod.ConfigError("eps_list must be strictly decreasing")
        if self.name in LAYER_EXPERIMENTS and self.grid.spacing > math.sqrt(eps.min()) / 4.0:
            raise config_mod.ConfigError(
                f"grid spacing {self.grid.spacing:.3g} does not resolve the thinnest layer; "
                f"need <= sqrt(min eps)/4 = {math.sqrt(eps.min()) / 4.0:.3g}"
            )


def default_spec(name: str, cp=None, **overrides) -> ExperimentSpec:
    """Spec for ``name`` from the (default or given) configuration, with the experiment's preset and kappa."""
    if name not in EXPERIMENTS:
        raise config_mod.ConfigError(f"unknown experiment {name!r}; choose from {EXPERIMENTS}")
    cp = config_mod.load_defaults() if cp is None else cp
    rc = config_mod.build_run_config(cp)
    preset, kappa, kw = _EXPERIMENT_SETUP[name]
    spec = ExperimentSpec(
        name=name,
        eps_list=rc.eps_list,
        grid=rc.grid,
        params=replace(rc.params, kappa=kappa, eps=0.0),
        preset=preset,
        scheme=rc.scheme,
        preset_kwargs={**rc.preset_kwargs, **kw},
        output_dir=rc.output_dir,
        stride=rc.stride,
        workers=rc.workers,
        monitor_stride=rc.monitor_stride,
        delta_exponent=rc.delta_exponent,
    )
    return replace(spec, **overrides) if overrides else spec


@dataclass(frozen=True)
class Verdict:
    name: str
    passed: bool
    value: float
    threshold: float
    detail: str = ""

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return f"[{mark}] {self.name}: value={self.value:.6g} threshold={self.threshold:.6g} {self.detail}".rstrip()


@dataclass
class ExperimentResult:
    name: str
    rows: list[dict]
    fits: dict[str, RateFit] = field(default_factory=dict)
    bl: dict = field(default_factory=dict)
    monitors: list[MonitorTable] = field(default_factory=list)
    verdicts: list[Verdict] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)

    def summary(self) -> dict:
        return {
            "experiment": self.name,
            "defaults_version": config_mod.defaults_version(),
            "eps_list": [r["eps"] for r in self.rows],
            "errors": self.rows,
            "fits": {k: f.as_dict() for k, f in self.fits.items()},
            "bl": self.bl,
            "monitors": [{"eps": m.eps, "kappa": m.kappa, **m.values} for m in self.monitors],
            "verdicts": [
                {"name": v.name, "passed": v.passed, "value": v.value, "threshold": v.threshold, "detail": v.detail}
                for v in self.verdicts
            ],
            "notes": self.notes,
            "passed": self.passed,
        }


# ----------------------------------------------------------------- sweeps


def compare_metrics(rec_eps: TrajectoryRecord, rec_lim: TrajectoryRecord, delta_exponent: float) -> dict:
    """Scalar error summary of one (eps, limit) pair; sup over snapshot times unless noted."""
    eps = rec_eps.params.eps
    g = rec_eps.grid
    delta = eps**delta_exponent
    row: dict[str, float] = {"eps": eps, "delta": delta}
    for kind, tag in (("SupC", "sup"), ("H1", "h1"), ("H2", "h2")):
        err = sup_in_time_error(rec_eps, rec_lim, kind)
        row[f"{tag}_w"], row[f"{tag}_c"] = err["w"], err["c"]
    inner = gradient_error_history(rec_eps, rec_lim, delta)
    full = gradient_error_history(rec_eps, rec_lim, 0.0)
    for f in ("w", "c"):
        row[f"grad_int_{f}"] = float(inner[f].max())
        row[f"grad_full_{f}"] = float(full[f].max())
        row[f"grad_full_T_{f}"] = interior_gradient_error(
            getattr(rec_eps, f)[-1], getattr(rec_lim, f)[-1], g, 0.0
        )
    row["mass_drift"] = mass_drift(rec_eps)
    row["c_min"] = float(rec_eps.diagnostics["c_min"].min())
    row["c_max"] = float(rec_eps.diagnostics["c_max"].max())
    row["c_cap"] = max(float(rec_eps.init.c0.max()), rec_eps.params.lam)
    return row


def _init(spec: ExperimentSpec, grid: RadialGrid, params: ModelParams):
    return make_preset(spec.preset, grid, params, **spec.preset_kwargs)


def _eps_job(args) -> dict:
    spec, eps, rec_lim, grid, dt = args
    params = replace(spec.params, eps=eps, dt=dt)
    stride = _stride_for(spec, dt)
    rec = run_eps(_init(spec, grid, params), params, spec.scheme, grid, stride)
    return compare_metrics(rec, rec_lim, spec.delta_exponent)


def _monitor_job(args) -> tuple[dict, MonitorTable]:
    spec, eps = args
    params = replace(spec.params, eps=eps)
    rec = run_eps(_init(spec, spec.grid, params), params, spec.scheme, spec.grid, spec.monitor_stride)
    mon = uniform_monitor(rec)
    row = {
        "eps": eps,
        "kappa": params.kappa,
        "mass_drift": mass_drift(rec),
        "c_min": float(rec.diagnostics["c_min"].min()),
        "c_max": float(rec.diagnostics["c_max"].max()),
        "c_cap": max(float(rec.init.c0.max()), params.lam),
        **mon.values,
    }
    return row, mon


def _stride_for(spec: ExperimentSpec, dt: float) -> int:
    """Snapshot stride giving (about) the same snapshot interval as the spec at step ``dt``."""
    return max(1, int(round(spec.stride * spec.params.dt / dt)))


def _map(fn, jobs, workers: int):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))  # ordered: deterministic reduce


@dataclass
class Sweep:
    spec: ExperimentSpec
    limit: TrajectoryRecord
    rows: list[dict]


def run_sweep(
    spec: ExperimentSpec,
    eps_list=None,
    grid: RadialGrid | None = None,
    dt: float | None = None,
) -> Sweep:
    """Limit run plus one eps run per value, all on the same grid and time levels."""
    from .limit_solver import run_limit

    grid = spec.grid if grid is None else grid
    dt = spec.params.dt if dt is None else dt
    eps_list = spec.eps_list if eps_list is None else tuple(eps_list)
    params = replace(spec.params, eps=0.0, dt=dt)
    rec_lim = run_limit(_init(spec, grid, params), params, spec.scheme, grid, _stride_for(spec, dt))
    jobs = [(spec, float(e), rec_lim, grid, dt) for e in eps_list]
    rows = _map(_eps_job, jobs, spec.workers)
    return Sweep(spec, rec_lim, rows)


# --------------------------------------------------------------- verdicts


def _strictly_decreasing(vals) -> bool:
    v = np.asarray(vals, dtype=float)
    return bool(np.all(np.diff(v) < 0.0))


def _decreasing_or_zero(vals) -> bool:
    v = np.asarray(vals, dtype=float)
    return bool(np.all(v <= ZERO_TOL)) or _strictly_decreasing(v)


def invariant_verdicts(rows: list[dict], thr: dict) -> list[Verdict]:
    drift = max(r["mass_drift"] for r in rows)
    low = min(r["c_min"] for r in rows)
    over = max(r["c_max"] - r["c_cap"] for r in rows)
    tol = thr["c_bound_tol"]
    return [
        Verdict("mass drift (relative, full horizon)", drift <= thr["mass_drift"], drift, thr["mass_drift"]),
        Verdict("oxygen lower bound", low >= -tol, low, -tol),
        Verdict("oxygen upper bound excess", over <= tol, over, tol),
    ]


def evaluate_rate_kpos(sweep: Sweep, thr: dict) -> ExperimentResult:
    rows = sweep.rows
    res = ExperimentResult("rate-kpos", rows)
    eps = [r["eps"] for r in rows]
    for f in ("w", "c"):
        errs = [r[f"sup_{f}"] for r in rows]
        res.verdicts.append(
            Verdict(f"sup-norm error of {f} strictly decreasing", _strictly_decreasing(errs), float(errs[-1]), float(errs[0]))
        )
        fit = fit_rate(zip(eps, errs))
        res.fits[f"sup_{f}"] = fit
        res.verdicts.append(
            Verdict(f"sup-norm rate of {f}", fit.slope >= thr["kpos_min_slope"], fit.slope, thr["kpos_min_slope"])
        )
    res.verdicts.extend(invariant_verdicts(rows, thr))
    return res


def evaluate_bl_thickness(sweep: Sweep, thr: dict) -> ExperimentResult:
    rows = sweep.rows
    res = ExperimentResult("bl-thickness", rows)
    params = sweep.spec.params
    flag, when = bl_occurrence(sweep.limit)
    res.verdicts.append(Verdict("layer criterion holds (limit density positive at a wall)", flag, float(flag), 1.0))
    # interior gradient bound with delta = eps^p
    inner = [r["grad_int_w"] + r["grad_int_c"] for r in rows]
    scale = [r["delta"] ** -0.5 * r["eps"] ** 0.25 for r in rows]
    ratio = np.array(inner) / np.array(scale)
    spread = float(ratio.max() / ratio.min())
    res.verdicts.append(Verdict("interior gradient error strictly decreasing", _strictly_decreasing(inner), inner[-1], inner[0]))
    res.verdicts.append(
        Verdict(
            "interior gradient / (delta^-1/2 eps^1/4) spread",
            spread <= thr["interior_ratio_spread"],
            spread,
            thr["interior_ratio_spread"],
        )
    )
    # full-interval oxygen gradient error at T stays away from zero
    final: LimitState = sweep.limit.final
    gap = max(abs(params.lam - limit_boundary_c(final, e)) for e in ("a", "b"))
    lower = thr["bl_lower_factor"] * params.kappa * gap
    full = np.array([r["grad_full_T_c"] for r in rows])
    res.verdicts.append(
        Verdict("full-interval c_r error at T above wall lower bound", bool(np.all(full >= lower)), float(full.min()), lower)
    )
    floor = thr["bl_shrink_factor"] * full[0]
    res.verdicts.append(
        Verdict("full-interval c_r error does not collapse", bool(np.all(full >= floor)), float(full.min()), float(floor))
    )
    res.bl = {
        "occurrence": flag,
        "witness_time": when,
        "lower_bound": lower,
        "ratio": ratio.tolist(),
        "per_eps": [
            {
                "eps": r["eps"],
                "delta": r["delta"],
                "interior_sup_grad_err": {"w": r["grad_int_w"], "c": r["grad_int_c"]},
                "full_sup_grad_err": {"w": r["grad_full_w"], "c": r["grad_full_c"]},
                "full_grad_err_at_T": {"w": r["grad_full_T_w"], "c": r["grad_full_T_c"]},
            }
            for r in rows
        ],
    }
    res.verdicts.extend(invariant_verdicts(rows, thr))
    return res


def evaluate_no_layer(sweep: Sweep, thr: dict) -> ExperimentResult:
    rows = sweep.rows
    res = ExperimentResult("no-layer", rows)
    flag, _ = bl_occurrence(sweep.limit)
    res.verdicts.append(Verdict("layer criterion fails (limit density zero at both walls)", not flag, float(flag), 0.0))
    for f in ("w", "c"):
        errs = [r[f"grad_full_{f}"] for r in rows]
        res.verdicts.append(
            Verdict(
                f"full-interval gradient error of {f} decreasing to zero",
                _decreasing_or_zero(errs),
                float(errs[-1]),
                float(errs[0]),
                "identically zero" if max(errs) <= ZERO_TOL else "",
            )
        )
    res.bl = {"occurrence": flag}
    res.verdicts.extend(invariant_verdicts(rows, thr))
    return res


def evaluate_rate_kzero(sweep: Sweep, thr: dict, floors: dict[float, dict] | None = None) -> ExperimentResult:
    """Rate fits of the sup-in-time H1 and H2 errors; ``floors`` maps eps to discretization-floor estimates."""
    rows = sweep.rows
    res = ExperimentResult("rate-kzero", rows)
    eps = [r["eps"] for r in rows]
    for kind in ("h1", "h2"):
        for f in ("w", "c"):
            key = f"{kind}_{f}"
            fit = fit_rate(zip(eps, [r[key] for r in rows]))
            res.fits[key] = fit
            res.verdicts.append(Verdict(f"{kind.upper()} rate of {f}", fit.slope >= thr["kzero_min_slope"], fit.slope, thr["kzero_min_slope"]))
            res.verdicts.append(
                Verdict(f"{kind.upper()} fit residual of {f}", fit.max_residual <= thr["kzero_max_residual"], fit.max_residual, thr["kzero_max_residual"])
            )
    if floors:
        e_min = eps[-1]
        fl = floors[e_min]
        ratio = min(rows[-1][k] / max(fl[k], 1e-300) for k in fl)
        res.verdicts.append(
            Verdict("smallest-eps error over discretization floor", ratio >= thr["kzero_floor_factor"], ratio, thr["kzero_floor_factor"])
        )
    res.verdicts.extend(invariant_verdicts(rows, thr))
    return res


def evaluate_monitor(tables: list[MonitorTable], rows: list[dict], thr: dict) -> ExperimentResult:
    res = ExperimentResult("monitor", rows, monitors=tables)
    for kappa in sorted({m.kappa for m in tables}):
        group = [m for m in tables if m.kappa == kappa]
        for key in group[0].values:
            vals = np.array([m.values[key] for m in group])
            if vals.min() <= 0.0:
                spread = 1.0 if vals.max() <= ZERO_TOL else math.inf
            else:
                spread = float(vals.max() / vals.min())
            res.verdicts.append(
                Verdict(f"kappa={kappa:g} {key} spread across eps", spread < thr["monitor_spread"], spread, thr["monitor_spread"])
            )
    res.verdicts.extend(invariant_verdicts(rows, thr))
    return res


# --------------------------------------------------------------- drivers


def floor_estimate(spec: ExperimentSpec, eps: float, fine_row: dict) -> dict:
    """|E_h - E_2h| for the H1/H2 errors at ``eps``; the coarse run uses 2*dr and 4*dt."""
    coarse = spec.grid.coarsened()
    sw = run_sweep(spec, [eps], grid=coarse, dt=4.0 * spec.params.dt)
    row = sw.rows[0]
    return {k: abs(fine_row[k] - row[k]) for k in ("h1_w", "h1_c", "h2_w", "h2_c")}


def run_rate_kzero(spec: ExperimentSpec, thr: dict) -> ExperimentResult:
    sweep = run_sweep(spec)
    rows = list(sweep.rows)
    notes = []
    floors: dict[float, dict] = {}
    while True:
        e_min = rows[-1]["eps"]
        floors[e_min] = floor_estimate(spec, e_min, rows[-1])
        ratio = min(rows[-1][k] / max(v, 1e-300) for k, v in floors[e_min].items())
        if ratio >= thr["kzero_floor_factor"] or len(rows) <= 3:
            break
        notes.append(
            f"dropped eps={e_min:g}: error/floor ratio {ratio:.3g} below {thr['kzero_floor_factor']:g}"
        )
        rows.pop()
    res = evaluate_rate_kzero(Sweep(spec, sweep.limit, rows), thr, floors)
    res.notes.extend(notes)
    res.bl = {"floors": {f"{k:g}": v for k, v in floors.items()}}
    return res


def run_monitor(spec: ExperimentSpec, thr: dict) -> ExperimentResult:
    specs = [spec]
    preset, kappa, kw = _MONITOR_KZERO
    specs.append(replace(spec, preset=preset, params=replace(spec.params, kappa=kappa), preset_kwargs={**spec.preset_kwargs, **kw}))
    jobs = [(s, float(e)) for s in specs for e in s.eps_list]
    out = _map(_monitor_job, jobs, spec.workers)
    rows = [r for r, _ in out]
    tables = [m for _, m in out]
    return evaluate_monitor(tables, rows, thr)


def run_experiment(spec: ExperimentSpec, thr: dict | None = None, persist: bool = True) -> ExperimentResult:
    """Execute the named protocol, write errors.csv and summary.json, return the verdicts."""
    spec.validate()
    thr = config_mod.thresholds() if thr is None else thr
    logger.info("experiment %s over eps=%s", spec.name, spec.eps_list)
    if spec.name == "rate-kzero":
        res = run_rate_kzero(spec, thr)
    elif spec.name == "monitor":
        res = run_monitor(spec, thr)
    else:
        sweep = run_sweep(spec)
        evaluate = {
            "rate-kpos": evaluate_rate_kpos,
            "bl-thickness": evaluate_bl_thickness,
            "no-layer": evaluate_no_layer,
        }[spec.name]
        res = evaluate(sweep, thr)
    if persist and spec.output_dir is not None:
        persist_result(res, Path(spec.output_dir) / spec.name)
    return res


def persist_result(res: ExperimentResult, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    if res.rows:
        cols = list(res.rows[0].keys())
        write_table(out / "errors.csv", cols, ([r[c] for c in cols] for r in res.rows))
    write_json(out / "summary.json", res.summary())
