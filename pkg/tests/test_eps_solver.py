import math

import numpy as np
import pytest

from chemolayer.eps_solver import mass_drift, next_target_time, run_eps, step_eps
from chemolayer.grid import FieldState, InitialData, ModelParams, RadialGrid
from chemolayer.limit_solver import LimitState, step_limit
from chemolayer.presets import make_preset
from chemolayer.scheme import SchemeConfig, SolverError, bernoulli, cfl_dt
from oracles import dense_step

CFG = SchemeConfig()


def _params(eps=0.01, kappa=1.0, lam=1.0, dt=1e-3, T=0.05):
    return ModelParams(eps, kappa, lam, dt, T)


@pytest.mark.parametrize("eps,kappa,lam", [(0.5, 0.0, 1.0), (0.01, 1.0, 2.0), (1e-4, 7.0, 0.3), (0.0, 1.0, 1.0)])
def test_steady_state_is_fixed(eps, kappa, lam):
    g = RadialGrid(1.0, 2.0, 3, 51)
    p = _params(eps, kappa, lam)
    s = FieldState(np.zeros(51), np.full(51, lam), 0.0)
    for _ in range(20):
        s, _ = step_eps(s, p, CFG, g)
    assert np.max(np.abs(s.w)) == 0.0
    assert np.max(np.abs(s.c - lam)) <= 1e-13


def test_zero_bacteria_to_t1():
    g = RadialGrid(1.0, 2.0, 3, 101)
    p = _params(0.01, 1.0, 1.0, dt=1e-2, T=1.0)
    rec = run_eps(make_preset("zero_bacteria", g, p), p, CFG, g, snapshot_stride=10)
    assert rec.times[-1] == pytest.approx(1.0)
    assert np.all(rec.w[-1] == 0.0)
    assert np.max(np.abs(rec.c[-1] - 1.0)) <= 1e-13


def test_mass_conserved_each_step():
    g = RadialGrid(1.0, 2.0, 3, 101)
    p = _params(0.01, 1.0, 1.0, dt=1e-3, T=0.05)
    s = make_preset("cosine_bump", g, p).state()
    vol = g.quadrature_weights
    for _ in range(50):
        s, rep = step_eps(s, p, CFG, g)
        assert abs(rep.mass_after - rep.mass_before) <= 1e-12 * rep.mass_before
        assert float(np.dot(vol, s.w)) == pytest.approx(rep.mass_after, rel=1e-15)
        assert rep.picard_iters >= 1


def test_crank_nicolson_also_conserves():
    g = RadialGrid(1.0, 2.0, 3, 101)
    p = _params(0.01, 1.0, 1.0, dt=1e-3, T=0.02)
    rec = run_eps(make_preset("cosine_bump", g, p), p, SchemeConfig(theta=0.5), g, snapshot_stride=5)
    assert mass_drift(rec) <= 1e-12


def test_cosine_bump_oxygen_stays_below_cap():
    g = RadialGrid(1.0, 2.0, 3, 401)
    p = ModelParams(1e-2, 1.0, 1.0, 1e-4, 0.5)
    rec = run_eps(make_preset("cosine_bump", g, p), p, CFG, g, snapshot_stride=100)
    assert rec.diagnostics["c_max"].max() <= 1.0 + 1e-10
    assert rec.diagnostics["c_min"].min() > 0.0
    assert np.all(rec.w >= 0.0)
    assert mass_drift(rec) <= 1e-10


def test_lyapunov_entropy_nonincreasing_kappa_zero():
    g = RadialGrid(1.0, 2.0, 3, 201)
    p = ModelParams(1e-2, 0.0, 1.0, 1e-3, 0.2)
    rec = run_eps(make_preset("neumann_pair", g, p), p, CFG, g, snapshot_stride=20)
    e = rec.diagnostics["entropy_lyap"]
    assert np.max(np.diff(e)) <= 1e-6


def test_record_times_and_final_snapshot():
    g = RadialGrid(1.0, 2.0, 3, 201)
    p = _params(dt=1e-3, T=0.0105)
    rec = run_eps(make_preset("cosine_bump", g, p), p, CFG, g, snapshot_stride=4)
    # 11 steps: the last one is short and lands exactly on T
    assert rec.times[-1] == pytest.approx(0.0105, abs=1e-15)
    np.testing.assert_allclose(rec.times[:-1], [0.0, 0.004, 0.008])
    assert rec.diagnostics["t"].size == 12
    assert rec.diagnostics["dt"][-1] == pytest.approx(5e-4)


def test_run_rejects_incompatible_data():
    g = RadialGrid(1.0, 2.0, 3, 51)
    p = _params()
    init = InitialData(np.ones(51), 0.5 + 0.0 * g.r, "flat-low")  # Robin residual kappa*(lam - c) != 0
    with pytest.raises(ValueError, match="compatibility"):
        run_eps(init, p, CFG, g)


def test_solver_error_carries_time():
    g = RadialGrid(1.0, 2.0, 3, 51)
    p = _params(dt=1e-2)
    s = FieldState(make_preset("cosine_bump", g, p).w0, np.ones(51), 0.25)
    with pytest.raises(SolverError) as info:
        step_eps(s, p, SchemeConfig(max_picard=1, tol_picard=1e-16), g)
    assert info.value.t == 0.25


def test_eps_zero_path_matches_limit_step():
    g = RadialGrid(1.0, 2.0, 3, 51)
    p = _params(eps=0.0)
    init = make_preset("cosine_bump", g, p)
    s_eps, _ = step_eps(init.state(), p, CFG, g)
    s_lim = step_limit(LimitState.from_initial(init), p, CFG, g)
    np.testing.assert_array_equal(s_eps.w, s_lim.w0_field)
    np.testing.assert_array_equal(s_eps.c, s_lim.c0_field)


def test_adaptive_dt_respects_cfl():
    g = RadialGrid(1.0, 2.0, 3, 51)
    p = _params(0.01, 0.0, 1.0, dt=1.0, T=1.0)
    init = make_preset("neumann_pair", g, p)
    cfg = SchemeConfig(adaptive_dt=True)
    bound = cfl_dt(init.c0, g, cfg)
    target = next_target_time(0, init.state(), p, cfg, g)
    assert target == pytest.approx(min(bound, p.dt))
    assert target <= g.spacing
    # fixed-dt policy ignores the CFL bound
    assert next_target_time(0, init.state(), p, CFG, g) == p.dt


def test_bernoulli_limits():
    x = np.array([-30.0, -1e-9, 0.0, 1e-9, 30.0])
    b = bernoulli(x)
    assert b[2] == 1.0
    np.testing.assert_allclose(b[1:4], 1.0, atol=1e-9)
    assert b[4] == pytest.approx(30.0 / math.expm1(30.0))
    np.testing.assert_allclose(bernoulli(-x) - bernoulli(x), x, atol=1e-12)


# ----------------------------------------------------------- dense oracle


@pytest.mark.parametrize("eps,kappa", [(0.3, 1.0), (0.01, 2.5), (0.1, 0.0)])
def test_one_step_matches_dense_oracle(eps, kappa):
    g = RadialGrid(1.0, 2.0, 3, 5)
    lam, dt = 1.3, 0.01
    w0 = np.array([1.2, 0.4, 2.0, 0.7, 1.1])
    c0 = np.array([0.9, 1.4, 0.6, 1.0, 1.2])
    p = ModelParams(eps, kappa, lam, dt, 1.0)
    new, _ = step_eps(FieldState(w0, c0, 0.0), p, CFG, g)
    w_ref, c_ref = dense_step(w0, c0, dt, eps, kappa, lam, 1.0, 2.0, 3, 5)
    assert np.max(np.abs(new.w - w_ref)) <= 1e-13
    assert np.max(np.abs(new.c - c_ref)) <= 1e-13


# ------------------------------------------------------- self-convergence


def test_self_convergence_second_order():
    finals = {}
    for n, dt in ((201, 1.6e-3), (401, 4e-4), (801, 1e-4)):
        g = RadialGrid(1.0, 2.0, 3, n)
        p = ModelParams(1e-2, 1.0, 1.0, dt, 0.5)
        rec = run_eps(make_preset("cosine_bump", g, p), p, CFG, g, snapshot_stride=10**6)
        finals[n] = rec.final_state()
    # compare on the 201-node points
    def diff(fine, coarse):
        k = (fine.w.size - 1) // (coarse.w.size - 1)
        return max(np.max(np.abs(fine.w[::k] - coarse.w)), np.max(np.abs(fine.c[::k] - coarse.c)))

    e1 = diff(finals[401], finals[201])
    e2 = diff(finals[801], finals[401])
    assert 3.5 < e1 / e2 < 4.5
