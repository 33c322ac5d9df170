import math

import numpy as np
import pytest

from conftest import half_norm_problem
from flopt.errors import Infeasible, NotPositiveDefinite, SingularKktMatrix, TooManyConstraints
from flopt.kernel import DeterministicRng
from flopt.multiplier import nnqp_solve
from flopt.oracles import (
    affine_projection,
    exponential_decay_reference,
    momentum_projected_gradient_oracle,
    sqp_equality_oracle,
    sqp_inequality_oracle,
    strongly_convex_rate_reference,
)
from flopt.problem import ConstraintKind, evaluate
from flopt.suite import quadratic_problem, random_qp

INEQ = ConstraintKind.INEQUALITY


class TestEqualityOracle:
    def test_hand_example(self):
        p = half_norm_problem([[1.0, 0.0]], [-1.0])
        np.testing.assert_allclose(sqp_equality_oracle(p, np.zeros(2), 1.0), [1.0, 0.0])

    def test_fixed_point(self):
        p = half_norm_problem([[1.0, 0.0]], [-1.0])
        x = np.array([1.0, 0.0])
        np.testing.assert_allclose(sqp_equality_oracle(p, x, 0.3), x, atol=1e-15)

    def test_singular(self):
        p = half_norm_problem([[1.0, 1.0], [1.0, 1.0]], [0.0, 1.0])
        with pytest.raises(SingularKktMatrix):
            sqp_equality_oracle(p, np.zeros(2), 1.0)

    def test_multiplier_returned(self):
        p = half_norm_problem([[1.0, 0.0]], [-1.0])
        _, lam = sqp_equality_oracle(p, np.zeros(2), 1.0, return_multiplier=True)
        np.testing.assert_allclose(lam, [-1.0])


class TestInequalityOracle:
    def test_inactive(self):
        p = half_norm_problem([[1.0, 0.0]], [-10.0], INEQ)
        x = np.array([1.0, 1.0])
        np.testing.assert_allclose(sqp_inequality_oracle(p, x, 0.5), x - 0.5 * x)

    def test_dual_nnqp_step(self):
        # primal subproblem solution equals the FL step built from the NNQP multiplier
        for seed in range(30):
            rng = DeterministicRng(seed)
            p = random_qp(8, 1 + seed % 6, "ineq", seed)
            x, eta = 2 * rng.normal_array(8), 0.1
            ev = evaluate(p, x)
            J, g = ev.jac_h, ev.grad_f
            lam = nnqp_solve(J @ J.T, J @ g - ev.h / eta).lam
            np.testing.assert_allclose(x - eta * (g + J.T @ lam),
                                       sqp_inequality_oracle(p, x, eta), atol=1e-7)

    def test_linearized_feasibility(self):
        for seed in range(20):
            p = random_qp(6, 1 + seed % 6, "ineq", seed)
            x = DeterministicRng(seed).normal_array(6)
            x_next, lam = sqp_inequality_oracle(p, x, 0.2, return_multiplier=True)
            ev = evaluate(p, x)
            assert np.all(ev.h + ev.jac_h @ (x_next - x) <= 1e-9)
            assert np.all(lam >= -1e-10)

    def test_infeasible(self):
        # x1 <= -1 and -x1 <= -1 cannot both hold
        p = quadratic_problem(np.eye(2), np.zeros(2), [[1.0, 0.0], [-1.0, 0.0]], [1.0, 1.0], INEQ)
        with pytest.raises(Infeasible):
            sqp_inequality_oracle(p, np.zeros(2), 1.0)

    def test_cap(self):
        p = quadratic_problem(np.eye(13), np.zeros(13), np.eye(13), np.zeros(13), INEQ)
        with pytest.raises(TooManyConstraints):
            sqp_inequality_oracle(p, np.zeros(13), 1.0)


class TestProjectedGradientOracle:
    def test_coordinate_projection(self):
        np.testing.assert_allclose(affine_projection([[1.0, 0.0]], [0.0], np.array([3.0, 4.0])),
                                   [0.0, 4.0])

    def test_tangent_gradient(self):
        # on x1 = 0 with a gradient along x2 the projection is inactive
        grad = lambda w: np.array([0.0, 1.0])
        x = np.array([0.0, 2.0])
        out = momentum_projected_gradient_oracle([[1.0, 0.0]], [0.0], grad, x, x, 0.0, 0.5)
        np.testing.assert_allclose(out, [0.0, 1.5])

    def test_extrapolation(self):
        grad = lambda w: np.zeros(2)
        out = momentum_projected_gradient_oracle([[1.0, 0.0]], [0.0], grad,
                                                 np.array([0.0, 2.0]), np.array([0.0, 1.0]),
                                                 0.5, 0.1)
        np.testing.assert_allclose(out, [0.0, 2.5])

    def test_rank_deficient(self):
        with pytest.raises(NotPositiveDefinite):
            affine_projection([[1.0, 0.0], [2.0, 0.0]], [0.0, 0.0], np.ones(2))


class TestReferences:
    def test_half_life(self):
        np.testing.assert_allclose(exponential_decay_reference([2.0], 1.0, math.log(2)), [1.0])

    def test_time_zero(self):
        np.testing.assert_array_equal(exponential_decay_reference([2.0, -3.0], [1.0, 5.0], 0.0),
                                      [2.0, -3.0])

    def test_underflow_is_zero(self):
        assert exponential_decay_reference([1.0], 20.0, 10.0)[0] == 0.0

    def test_negative_time(self):
        with pytest.raises(ValueError):
            exponential_decay_reference([1.0], 1.0, -1.0)

    def test_rate(self):
        assert strongly_convex_rate_reference(3.0, 0.7, 0.0) == 3.0
        assert strongly_convex_rate_reference(1.0, 0.5, 1.0) == pytest.approx(0.367879, abs=1e-6)
        assert strongly_convex_rate_reference(0.0, 2.0, 5.0) == 0.0

    def test_rate_domain(self):
        with pytest.raises(ValueError):
            strongly_convex_rate_reference(1.0, 0.0, 1.0)
