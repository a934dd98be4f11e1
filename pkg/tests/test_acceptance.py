"""Acceptance suite.  Each test checks one numbered criterion and logs one PASS/FAIL line.

Desk-scale defaults: a=1, b=2, n=3, T=0.5, N=801, dt=1e-4 and
eps_list = 1e-2, 3e-3, 1e-3, 3e-4, 1e-4.  Thresholds come from the frozen
defaults file.  Runtime is a couple of minutes on one core.
"""

import numpy as np
import pytest

from chemolayer.analysis import robin_reduction_residual
from chemolayer.config import thresholds
from chemolayer.eps_solver import step_eps
from chemolayer.experiments import (
    default_spec,
    evaluate_bl_thickness,
    evaluate_rate_kpos,
    run_experiment,
    run_sweep,
)
from chemolayer.grid import FieldState, ModelParams, RadialGrid, first_derivative
from chemolayer.limit_solver import run_limit
from chemolayer.presets import make_preset
from chemolayer.scheme import SchemeConfig
from oracles import dense_step, robin_residual_by_quadrature

CFG = SchemeConfig()


def _log(log, number, title, ok, detail):
    line = f"criterion {number} [{'PASS' if ok else 'FAIL'}] {title}: {detail}"
    print(line)
    log.append(line)


def _verdict_detail(verdicts):
    return "; ".join(f"{v.name} {v.value:.4g} vs {v.threshold:.4g}" for v in verdicts)


@pytest.fixture(scope="session")
def thr():
    return thresholds()


@pytest.fixture(scope="session")
def kpos_sweep():
    return run_sweep(default_spec("rate-kpos", output_dir=None))


@pytest.fixture(scope="session")
def rate_kpos(kpos_sweep, thr):
    return evaluate_rate_kpos(kpos_sweep, thr)


@pytest.fixture(scope="session")
def bl_thickness(kpos_sweep, thr):
    return evaluate_bl_thickness(kpos_sweep, thr)


@pytest.fixture(scope="session")
def no_layer(thr):
    return run_experiment(default_spec("no-layer", output_dir=None), thr, persist=False)


@pytest.fixture(scope="session")
def rate_kzero(thr):
    return run_experiment(default_spec("rate-kzero", output_dir=None), thr, persist=False)


@pytest.fixture(scope="session")
def monitor(thr):
    return run_experiment(default_spec("monitor", output_dir=None), thr, persist=False)


@pytest.fixture(scope="session")
def limit_levels():
    """cosine_bump limit runs with dt proportional to dr^2, finest level at the defaults."""
    out = {}
    for n, dt in ((201, 1.6e-3), (401, 4e-4), (801, 1e-4)):
        g = RadialGrid(1.0, 2.0, 3, n)
        p = ModelParams(0.0, 1.0, 1.0, dt, 0.5)
        out[n] = run_limit(make_preset("cosine_bump", g, p), p, CFG, g, max(1, int(round(1e-2 / dt))))
    return out


def _wall_mismatch(rec):
    g = rec.grid
    dc = np.array([first_derivative(c, g)[[0, -1]] for c in rec.c])
    c_err = max(
        np.max(np.abs(rec.c[:, 0] - rec.extra["c_exact_a"])),
        np.max(np.abs(rec.c[:, -1] - rec.extra["c_exact_b"])),
    )
    cr_err = max(
        np.max(np.abs(dc[:, 0] - rec.extra["cr_exact_a"])),
        np.max(np.abs(dc[:, 1] - rec.extra["cr_exact_b"])),
    )
    return float(c_err), float(cr_err)


# ----------------------------------------------------------------------------


def test_criterion_1_exact_invariants(acceptance_log, thr, rate_kpos, no_layer, rate_kzero, monitor, limit_levels):
    inv = []
    for res in (rate_kpos, no_layer, rate_kzero, monitor):
        inv.extend(v for v in res.verdicts if v.name.startswith(("mass drift", "oxygen")))
    drift = max(v.value for v in inv if v.name.startswith("mass"))
    for rec in limit_levels.values():
        m = rec.diagnostics["mass"]
        drift = max(drift, float(np.max(np.abs(m - m[0])) / m[0]))
    g = RadialGrid(1.0, 2.0, 3, 801)
    steady = 0.0
    for eps, kappa, lam in ((1e-2, 1.0, 1.0), (1e-4, 5.0, 2.0), (0.3, 0.0, 0.5)):
        p = ModelParams(eps, kappa, lam, 1e-4, 0.5)
        s = FieldState(np.zeros(801), np.full(801, lam), 0.0)
        for _ in range(200):
            s, _ = step_eps(s, p, CFG, g)
        steady = max(steady, float(np.max(np.abs(s.w))), float(np.max(np.abs(s.c - lam))))
    ok = all(v.passed for v in inv) and drift <= thr["mass_drift"] and steady <= thr["steady_tol"]
    _log(
        acceptance_log, 1, "exact invariants", ok,
        f"max mass drift {drift:.3g} (<= {thr['mass_drift']:g}); "
        f"oxygen bounds {'held' if all(v.passed for v in inv) else 'violated'}; "
        f"steady-state deviation {steady:.3g} (<= {thr['steady_tol']:g})",
    )
    assert ok


def test_criterion_2_limit_wall_oracle(acceptance_log, thr, limit_levels):
    mism = {n: _wall_mismatch(rec) for n, rec in limit_levels.items()}
    c_fine, cr_fine = mism[801]
    ratios = [mism[201][1] / mism[401][1], mism[401][1] / mism[801][1]]
    tol = thr["limit_wall_tol"]
    ok = c_fine <= tol and cr_fine <= tol and min(ratios) >= thr["limit_contraction_min"]
    _log(
        acceptance_log, 2, "limit-solver wall values vs closed forms", ok,
        f"N=801 |c0 - closed form| {c_fine:.3g}, |c0_r - closed form| {cr_fine:.3g} (<= {tol:g}); "
        f"c0_r mismatch {mism[201][1]:.3g} -> {mism[401][1]:.3g} -> {mism[801][1]:.3g}, "
        f"contraction {ratios[0]:.2f}, {ratios[1]:.2f} (>= {thr['limit_contraction_min']:g})",
    )
    assert ok


def test_criterion_3_kappa_zero_rate(acceptance_log, rate_kzero):
    fits = ", ".join(f"{k} slope {f.slope:.3f} resid {f.max_residual:.3f}" for k, f in rate_kzero.fits.items())
    notes = " ".join(rate_kzero.notes) or "no eps dropped"
    _log(acceptance_log, 3, "kappa=0 H1/H2 rates", rate_kzero.passed, f"{fits}; {notes}; {_verdict_detail(rate_kzero.verdicts[-4:-3])}")
    assert rate_kzero.passed, "\n".join(v.line() for v in rate_kzero.verdicts)


def test_criterion_4_kappa_pos_sup_rate(acceptance_log, rate_kpos):
    rows = rate_kpos.rows
    seq = {f: " > ".join(f"{r[f'sup_{f}']:.3g}" for r in rows) for f in ("w", "c")}
    fits = ", ".join(f"{k} slope {f.slope:.3f}" for k, f in rate_kpos.fits.items())
    _log(acceptance_log, 4, "kappa>0 sup-norm rate", rate_kpos.passed, f"w: {seq['w']}; c: {seq['c']}; {fits} (>= 0.22)")
    assert rate_kpos.passed, "\n".join(v.line() for v in rate_kpos.verdicts)


def test_criterion_5_interior_gradient(acceptance_log, bl_thickness):
    vs = [v for v in bl_thickness.verdicts if v.name.startswith("interior")]
    ok = all(v.passed for v in vs)
    seq = " > ".join(f"{r['grad_int_w'] + r['grad_int_c']:.3g}" for r in bl_thickness.rows)
    _log(acceptance_log, 5, "interior gradient bound with delta=eps^0.4", ok, f"errors {seq}; {_verdict_detail(vs[1:])}")
    assert ok, "\n".join(v.line() for v in vs)


def test_criterion_6_layer_dichotomy(acceptance_log, bl_thickness, no_layer):
    occ = [v for v in bl_thickness.verdicts if v.name.startswith(("layer", "full-interval"))]
    nl = [v for v in no_layer.verdicts if not v.name.startswith(("mass", "oxygen"))]
    ok = all(v.passed for v in occ + nl)
    full = ", ".join(f"{r['grad_full_T_c']:.3g}" for r in bl_thickness.rows)
    nl_c = " > ".join(f"{r['grad_full_c']:.3g}" for r in no_layer.rows)
    nl_w = max(r["grad_full_w"] for r in no_layer.rows)
    _log(
        acceptance_log, 6, "boundary-layer dichotomy", ok,
        f"(a) c_r error at T {full} vs lower bound {bl_thickness.bl['lower_bound']:.3g}; "
        f"(b) no-layer c_r error {nl_c}, w_r error max {nl_w:.3g}",
    )
    assert ok, "\n".join(v.line() for v in occ + nl)


def test_criterion_7_uniform_monitors(acceptance_log, monitor):
    vs = [v for v in monitor.verdicts if "spread" in v.name]
    bad = [v for v in vs if not v.passed]
    worst = max(vs, key=lambda v: v.value)
    detail = f"{len(vs) - len(bad)}/{len(vs)} quantities within factor 10; largest spread {worst.name} {worst.value:.3g}"
    _log(acceptance_log, 7, "eps-uniform monitors", not bad, detail)
    assert not bad, "\n".join(v.line() for v in bad)


def test_criterion_8_oracles(acceptance_log, thr, limit_levels):
    g = RadialGrid(1.0, 2.0, 3, 5)
    w0 = np.array([1.2, 0.4, 2.0, 0.7, 1.1])
    c0 = np.array([0.9, 1.4, 0.6, 1.0, 1.2])
    dense_err = 0.0
    for eps, kappa in ((0.3, 1.0), (0.01, 2.5), (0.1, 0.0)):
        p = ModelParams(eps, kappa, 1.3, 0.01, 1.0)
        new, _ = step_eps(FieldState(w0, c0, 0.0), p, CFG, g)
        w_ref, c_ref = dense_step(w0, c0, 0.01, eps, kappa, 1.3, 1.0, 2.0, 3, 5)
        dense_err = max(dense_err, float(np.max(np.abs(new.w - w_ref))), float(np.max(np.abs(new.c - c_ref))))
    rec = limit_levels[801]
    d = rec.diagnostics
    robin_err = 0.0
    for end in ("a", "b"):
        stored = robin_reduction_residual(rec.final, end, rec.params)
        direct = robin_residual_by_quadrature(d["t"], d[f"w_{end}"], d[f"c_{end}"], rec.params.lam)
        robin_err = max(robin_err, abs(stored - direct))
    ok = dense_err <= thr["dense_oracle_tol"] and robin_err <= thr["robin_quadrature_tol"]
    _log(
        acceptance_log, 8, "oracle equivalence", ok,
        f"N=5 step vs dense solve {dense_err:.3g} (<= {thr['dense_oracle_tol']:g}); "
        f"Robin residual vs trapezoid quadrature {robin_err:.3g} (<= {thr['robin_quadrature_tol']:g})",
    )
    assert ok
