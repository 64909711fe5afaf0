"""Acceptance suite: end-to-end statistical, oracle and performance gates.

Each test prints a single ``[PASS]``/``[FAIL]`` line with the measured
quantity and its tolerance before asserting, so a full run doubles as a
readable acceptance report.
"""
import math
import time
from dataclasses import replace

import numpy as np
import pytest
from scipy import stats

from beliefcbf.barriers import (collision_barrier, collision_barrier_batch,
                                collision_barrier_values,
                                collision_essential_lb, compose_active,
                                fov_barrier)
from beliefcbf.belief import BeliefState, sample_initial_belief
from beliefcbf.config import load_scenario
from beliefcbf.qp import QpInfeasibleError, kkt_residuals, solve_qp
from beliefcbf.risk_bounds import (RiskMeasure, RiskSpec, empirical_var,
                                   risk_lower_bound)
from beliefcbf.safety_filter import FilterConfig, assemble_constraint, filter_step
from beliefcbf.scenarios import benchmark, run_tracking, shift_experiment
from beliefcbf.sde import ModelParams, ObjectState, RobotState

from test_barriers import _fd_gradient, _fd_hessian
from test_qp import _random_spec

_MU, _SIGMA = 0.5, 0.2
_TAU, _DELTA = 0.1, 0.05


def _report(num, name, ok, detail):
    print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {num} ({name}): {detail}")


def _spec(measure, **kw):
    kw.setdefault("delta", _DELTA)
    kw.setdefault("essential_lb", -1.0)
    if measure is not RiskMeasure.EXPECTATION:
        kw.setdefault("tau", _TAU)
    return RiskSpec(measure=measure, **kw)


# ---------------------------------------------------------------------------
# 1. concentration guarantee


def test_criterion_1_concentration_guarantee():
    n, trials = 200, 5000
    true_var = _MU + _SIGMA * stats.norm.ppf(_TAU)
    z = stats.norm.ppf(_TAU)
    true_cvar = _MU - _SIGMA * stats.norm.pdf(z) / _TAU
    rng = np.random.default_rng(0)
    t0 = time.perf_counter()
    viol_var = viol_cvar = 0
    var_spec = _spec(RiskMeasure.VAR)
    cvar_spec = _spec(RiskMeasure.CVAR)
    for _ in range(trials):
        row = rng.normal(_MU, _SIGMA, size=n)
        if risk_lower_bound(row, var_spec).value > true_var:
            viol_var += 1
        if risk_lower_bound(row, cvar_spec).value > true_cvar:
            viol_cvar += 1
    wall = time.perf_counter() - t0
    rate_var = viol_var / trials
    rate_cvar = viol_cvar / trials
    limit = 0.0593
    ok = rate_var <= limit and rate_cvar <= limit and wall < 30.0
    _report(1, "concentration guarantee", ok,
            f"violation rates VaR {rate_var:.4f}, CVaR {rate_cvar:.4f} "
            f"(limit {limit}), wall {wall:.1f}s (< 30s)")
    assert rate_var <= limit
    assert rate_cvar <= limit
    assert wall < 30.0


# ---------------------------------------------------------------------------
# 2. bounds sit below empirical statistics


def test_criterion_2_bounds_below_empirical():
    n, repeats = 1000, 1000
    rng = np.random.default_rng(1)
    specs = {m: _spec(m) for m in RiskMeasure}
    hold = 0
    for _ in range(repeats):
        row = rng.normal(_MU, _SIGMA, size=n)
        srt = np.sort(row)
        j = int(n * _TAU)
        emp_var = srt[j - 1]
        emp_cvar = float(srt[:j].mean())
        emp_mean = float(row.mean())
        ok = (risk_lower_bound(row, specs[RiskMeasure.VAR]).value <= emp_var
              and risk_lower_bound(row, specs[RiskMeasure.CVAR]).value <= emp_cvar
              and risk_lower_bound(row, specs[RiskMeasure.EXPECTATION]).value
              <= emp_mean)
        hold += ok
    frac = hold / repeats
    ok = frac >= 0.99
    _report(2, "bounds below empirical", ok,
            f"ordering held in {frac:.3f} of {repeats} repeats (need >= 0.99)")
    assert frac >= 0.99


# ---------------------------------------------------------------------------
# 3. robustness monotonicity


def test_criterion_3_robust_monotonicity():
    rng = np.random.default_rng(2)
    ells = (0.0, 0.02, 0.05, 0.09)
    worst = 0.0
    exact = True
    for _ in range(1000):
        row = rng.normal(rng.uniform(-1, 1) + 1.5, rng.uniform(0.1, 0.5),
                         size=500)
        lb = float(row.min()) - 0.1
        for measure in (RiskMeasure.VAR, RiskMeasure.CVAR):
            vals = [risk_lower_bound(
                row, _spec(measure, ell=e, essential_lb=lb)).value
                for e in ells]
            nominal = risk_lower_bound(
                row, _spec(measure, essential_lb=lb)).value
            exact = exact and vals[0] == nominal
            worst = max(worst, max(vals[i + 1] - vals[i]
                                   for i in range(len(ells) - 1)))
    ok = exact and worst <= 0.0
    _report(3, "robust monotonicity", ok,
            f"max increase along ell {worst:.3g} (need <= 0), "
            f"ell=0 equals nominal exactly: {exact}")
    assert exact
    assert worst <= 0.0


# ---------------------------------------------------------------------------
# 4. derivative correctness


def _rand_pose(rng):
    return RobotState(*rng.uniform(-2, 2, size=2),
                      rng.uniform(-math.pi, math.pi))


def _rand_obj(rng, x):
    while True:
        o = ObjectState(*rng.uniform(-3, 3, size=2))
        if math.hypot(o.q_x - x.p_x, o.q_y - x.p_y) > 0.3:
            return o


def test_criterion_4_derivative_correctness():
    params = ModelParams()
    rng = np.random.default_rng(3)
    tol_barrier, tol_composed = 1e-5, 1e-4
    worst_barrier = 0.0

    def rel_err(a, b):
        return float(np.max(np.abs(a - b) / np.maximum(1.0, np.abs(a))))

    for _ in range(100):
        x = _rand_pose(rng)
        o = _rand_obj(rng, x)
        for ev, f_x, f_o in (
            (collision_barrier(x, o, params),
             lambda z: collision_barrier(RobotState(*z), o, params).h,
             lambda z: collision_barrier(x, ObjectState(*z), params).h),
            (fov_barrier(x, o, params, 1),
             lambda z: fov_barrier(RobotState(*z), o, params, 1).h,
             lambda z: fov_barrier(x, ObjectState(*z), params, 1).h),
            (fov_barrier(x, o, params, 2),
             lambda z: fov_barrier(RobotState(*z), o, params, 2).h,
             lambda z: fov_barrier(x, ObjectState(*z), params, 2).h),
        ):
            worst_barrier = max(
                worst_barrier,
                rel_err(ev.grad_x, _fd_gradient(f_x, x.as_array())),
                rel_err(ev.grad_o, _fd_gradient(f_o, o.as_array())),
                rel_err(ev.hess_x, _fd_hessian(f_x, x.as_array())),
                rel_err(ev.hess_o, _fd_hessian(f_o, o.as_array())))

    # composed belief barrier: gradient of the bound value in robot state,
    # guarded against order-statistic ties
    worst_composed = 0.0
    checked = 0
    spec = _spec(RiskMeasure.VAR, essential_lb=-10.0)
    while checked < 100:
        x = _rand_pose(rng)
        samples = x.as_array()[:2] + rng.uniform(0.5, 2.5, size=(60, 2)) \
            * rng.choice([-1, 1], size=(60, 2))
        h = collision_barrier_values(x, samples, params)
        if np.min(np.diff(np.sort(h))) < 1e-5:
            continue
        checked += 1
        bound = risk_lower_bound(h, spec)
        _, gx, hx, go, ho = collision_barrier_batch(
            x, samples[bound.active_indices], params)
        bcbf = compose_active(bound, -10.0, gx, hx, go, ho)
        fd = _fd_gradient(
            lambda z: risk_lower_bound(
                collision_barrier_values(RobotState(*z), samples, params),
                spec).value, x.as_array())
        worst_composed = max(worst_composed, rel_err(bcbf.grad_x, fd))

    ok = worst_barrier <= tol_barrier and worst_composed <= tol_composed
    _report(4, "derivative correctness", ok,
            f"worst barrier rel err {worst_barrier:.2e} (<= {tol_barrier}), "
            f"worst composed rel err {worst_composed:.2e} (<= {tol_composed})")
    assert worst_barrier <= tol_barrier
    assert worst_composed <= tol_composed


# ---------------------------------------------------------------------------
# 5. QP correctness


def _grid_best(spec, lo, hi, n):
    """Best feasible objective on an n x n grid of [lo, hi], or None."""
    G, g = spec.rows()
    xs = np.linspace(lo[0], hi[0], n)
    ys = np.linspace(lo[1], hi[1], n)
    U = np.stack(np.meshgrid(xs, ys, indexing="ij"), axis=-1).reshape(-1, 2)
    feas = np.all(U @ G.T >= g - 1e-9, axis=1)
    if not feas.any():
        return None
    D = U[feas] - spec.u_ref
    obj = np.einsum("ni,ij,nj->n", D, spec.Q, D)
    return float(obj.min())


def test_criterion_5_qp_correctness():
    rng = np.random.default_rng(4)
    worst_kkt = 0.0
    worst_gap = 0.0
    solved = compared = 0
    for _ in range(1000):
        spec = _random_spec(rng)
        try:
            u = solve_qp(spec)
        except QpInfeasibleError:
            continue
        solved += 1
        res = kkt_residuals(spec, u)
        worst_kkt = max(worst_kkt, res["feasibility"], res["stationarity"],
                        res["complementarity"])
        d = u - spec.u_ref
        obj = float(d @ spec.Q @ d)
        # one-sided against a global coarse grid: the exact optimum can
        # never lose to any feasible grid point
        coarse = _grid_best(spec, spec.lo, spec.hi, 81)
        if coarse is not None:
            assert obj <= coarse + 1e-9
        # two-sided agreement with a 1e-3-resolution local grid; by
        # convexity a local certificate at the solution is global
        local = _grid_best(spec, u - 0.02, u + 0.02, 41)
        if local is None:
            continue
        compared += 1
        assert obj <= local + 1e-9
        worst_gap = max(worst_gap, local - obj)
    ok = worst_kkt <= 1e-9 and worst_gap <= 0.05 and solved >= 800
    _report(5, "QP correctness", ok,
            f"worst KKT residual {worst_kkt:.2e} (<= 1e-9) over {solved} "
            f"instances, worst grid gap {worst_gap:.2e} (<= 5e-2) "
            f"over {compared} grids")
    assert worst_kkt <= 1e-9
    assert worst_gap <= 0.05
    assert solved >= 800


# ---------------------------------------------------------------------------
# 6. dense-assembly equivalence


def _dense_constraint(x, samples, params, spec, v_est, cfg):
    """Constraint scalars via a full belief-space assembly, no sparsity."""
    n = samples.shape[0]
    h = collision_barrier_values(x, samples, params)
    bound = risk_lower_bound(h, spec)
    _, gx_all, hx_all, go_all, ho_all = collision_barrier_batch(
        x, samples, params)
    w = bound.weights
    grad_x = np.einsum("n,ni->i", w, gx_all)
    hess_x = np.einsum("n,nij->ij", w, hx_all)
    grad_B = (w[:, None] * go_all).reshape(-1)          # length 2N
    H_B = np.zeros((2 * n, 2 * n))                      # block diagonal
    for i in range(n):
        H_B[2 * i:2 * i + 2, 2 * i:2 * i + 2] = w[i] * ho_all[i]

    ct, st = math.cos(x.theta), math.sin(x.theta)
    lin_u = np.array([grad_x[0] * ct + grad_x[1] * st, grad_x[2]])
    S = np.diag(params.sigma_diag**2)
    D = np.diag(np.tile(params.d_diag, n)**2)
    V = np.tile(np.asarray(v_est, float), n)
    h_t = bound.value
    other = 0.5 * np.trace(S @ hess_x)
    other += float(grad_B @ V)
    other += 0.5 * np.trace(D @ H_B)
    h_div = max(h_t, cfg.h_min)
    other -= float(grad_x @ S @ grad_x) / h_div
    other -= float(grad_B @ D @ grad_B) / h_div
    rhs = -cfg.gamma * h_t**3 - other
    return lin_u, rhs, bound


def test_criterion_6_dense_assembly_equivalence():
    params = ModelParams()
    rng = np.random.default_rng(5)
    spec = _spec(RiskMeasure.VAR, essential_lb=collision_essential_lb(params))
    cfg = FilterConfig(risk=spec, gamma=2.0)
    v_est = np.array([0.4, -0.6])
    worst = 0.0
    cases = 0
    while cases < 200:
        x = _rand_pose(rng)
        n = int(rng.integers(29, 51))
        ang = rng.uniform(-math.pi, math.pi, size=n)
        rad = rng.uniform(0.6, 2.5, size=n)
        samples = np.column_stack([x.p_x + rad * np.cos(ang),
                                   x.p_y + rad * np.sin(ang)])
        lin_d, rhs_d, bound = _dense_constraint(x, samples, params, spec,
                                                v_est, cfg)
        if bound.value <= 0.0:
            continue
        cases += 1
        _, gx_a, hx_a, go_a, ho_a = collision_barrier_batch(
            x, samples[bound.active_indices], params)
        bcbf = compose_active(bound, spec.essential_lb, gx_a, hx_a, go_a, ho_a)
        con = assemble_constraint(bcbf, x, params, v_est, cfg)
        scale = max(1.0, abs(rhs_d), float(np.abs(lin_d).max()))
        worst = max(worst,
                    float(np.abs(con.lin_u - lin_d).max()) / scale,
                    abs(con.rhs - rhs_d) / scale)
    ok = worst <= 1e-10
    _report(6, "dense-assembly equivalence", ok,
            f"worst relative deviation {worst:.2e} (<= 1e-10) over 200 cases")
    assert worst <= 1e-10


# ---------------------------------------------------------------------------
# 7. tracking invariance


def test_criterion_7_tracking_invariance():
    cfg, _ = load_scenario("configs/tracking.json")
    total = positive = 0
    ordered = True
    for seed in range(20):
        res, _ = run_tracking(cfg, seed)
        total += res.steps
        positive += int((res.min_bounds > 0).sum())
        ordered = ordered and bool(
            np.all(res.min_bounds <= res.min_empirical + 1e-12))
    frac = positive / total
    ok = frac >= 0.999 and ordered
    _report(7, "tracking invariance", ok,
            f"bound positive at {frac:.4f} of {total} steps (need >= 0.999), "
            f"bound <= empirical at every step: {ordered}")
    assert frac >= 0.999
    assert ordered


# ---------------------------------------------------------------------------
# 8. collision benchmark ordering


def test_criterion_8_benchmark_ordering():
    cfg, opts = load_scenario("configs/collision.json")
    t0 = time.perf_counter()
    summary = benchmark(cfg, 100, opts["methods"], base_seed=0)
    wall = time.perf_counter() - t0
    by_label = {m.label: m for m in summary.methods}
    var_m = by_label["VaR_0.1"]
    cvar_m = by_label["CVaR_0.1"]
    e_m = by_label["E"]
    ok = (e_m.collision >= 30 and var_m.collision <= 8
          and var_m.timeout == 0 and cvar_m.collision <= 5
          and cvar_m.timeout >= var_m.timeout and wall < 600.0)
    _report(8, "benchmark ordering", ok,
            f"collisions E {e_m.collision} (>= 30), VaR {var_m.collision} "
            f"(<= 8, timeouts {var_m.timeout} == 0), CVaR {cvar_m.collision} "
            f"(<= 5, timeouts {cvar_m.timeout} >= {var_m.timeout}), "
            f"wall {wall:.0f}s (< 600s)")
    assert e_m.collision >= 30
    assert var_m.collision <= 8 and var_m.timeout == 0
    assert cvar_m.collision <= 5 and cvar_m.timeout >= var_m.timeout
    assert wall < 600.0


# ---------------------------------------------------------------------------
# 9. distribution-shift robustness


def test_criterion_9_shift_robustness():
    cfg, opts = load_scenario("configs/collision.json")
    summary = shift_experiment(cfg, 100, ell=opts["shift_ell"],
                               velocity_scale=opts["shift_velocity_scale"],
                               base_seed=0)
    nominal, robust = summary.methods
    assert summary.config["n_samples"] >= 299
    ok = robust.collision < nominal.collision and robust.collision <= 3
    _report(9, "shift robustness", ok,
            f"collisions robust {robust.collision} < nominal "
            f"{nominal.collision}, robust <= 3")
    assert robust.collision < nominal.collision
    assert robust.collision <= 3


# ---------------------------------------------------------------------------
# 10. real-time performance


def test_criterion_10_filter_step_performance():
    cfg, _ = load_scenario("configs/collision.json")
    x = RobotState(*cfg.start)
    times = {}
    for n in (200, 5000):
        belief = sample_initial_belief(cfg.mixture, n,
                                       np.random.default_rng(0))
        # warm-up covers lazy imports and cache population
        filter_step(x, belief, cfg.params, cfg.filter, cfg.target, cfg.v_est)
        t0 = time.perf_counter()
        steps = 200
        for _ in range(steps):
            _, diag = filter_step(x, belief, cfg.params, cfg.filter,
                                  cfg.target, cfg.v_est)
        times[n] = (time.perf_counter() - t0) / steps * 1e3
    ok = times[200] <= 1.0 and times[5000] <= 5.0
    _report(10, "real-time performance", ok,
            f"mean filter step {times[200]:.3f} ms at N=200 (<= 1 ms), "
            f"{times[5000]:.3f} ms at N=5000 (<= 5 ms)")
    assert times[200] <= 1.0
    assert times[5000] <= 5.0
