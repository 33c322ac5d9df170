"""KKT gaps, merit functions and the least-squares multiplier."""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, MetricNotIdentity
from .kernel import finite_diff_jacobian, spd_solve
from .multiplier import metric_blocks
from .problem import ConstraintKind, MetricSpec, evaluate

__all__ = [
    "KktReport",
    "kkt_gap",
    "lambda_bar",
    "merit_equality",
    "merit_inequality",
    "momentum_merit",
    "affine_momentum_constants",
]

_IDENTITY = MetricSpec.identity()


@dataclass(frozen=True)
class KktReport:
    stationarity: float
    feasibility: float
    complementarity: float

    @property
    def gap(self):
        return max(self.stationarity, self.feasibility, self.complementarity)


def kkt_gap(ev, lam, kind):
    """KKT violation of ``(ev.x, lam)``.

    Equality: ``max(||grad f + J^T lam||, ||h||_inf)``.
    Inequality: ``max(||grad f + J^T lam||, |lam^T h|, max_i [h_i]_+)``.
    """
    lam = np.asarray(lam, dtype=float)
    if lam.shape != ev.h.shape:
        raise DimensionMismatch(f"lambda has shape {lam.shape}, expected {ev.h.shape}")
    stat = float(np.linalg.norm(ev.grad_f + ev.jac_h.T @ lam))
    if kind is ConstraintKind.EQUALITY:
        feas = float(np.max(np.abs(ev.h), initial=0.0))
        return KktReport(stat, feas, 0.0)
    if np.any(lam < -1e-10):
        raise ValueError("inequality multipliers must be nonnegative")
    feas = float(np.max(np.maximum(ev.h, 0.0), initial=0.0))
    return KktReport(stat, feas, float(abs(lam @ ev.h)))


def lambda_bar(ev, metric=None):
    """Least-squares multiplier ``-(J T J^T)^{-1} J T grad f``.

    It minimizes ``||grad f + J^T mu||`` in the ``T``-weighted norm and is
    the limit of the FL multiplier as ``h -> 0``.
    """
    G, JTg, _, _ = metric_blocks(ev, metric or _IDENTITY)
    return -spd_solve(G, JTg)


def merit_equality(ev, rho):
    """``f + rho * sum |h_i|``."""
    if not rho > 0:
        raise ValueError("rho must be positive")
    return ev.f + rho * float(np.sum(np.abs(ev.h)))


def merit_inequality(ev, L):
    """``f + L * sum [h_i]_+``."""
    if not L > 0:
        raise ValueError("L must be positive")
    return ev.f + L * float(np.sum(np.maximum(ev.h, 0.0)))


def momentum_merit(problem, x, z, a1, a2, alpha):
    """Lyapunov function of the equality FL-momentum flow.

    ::

        l(x, z) = a1 alpha f + (a2 alpha / 2) ||h||^2 + a1 alpha lbar^T h
                  + 1/2 ||z||^2
                  + (a1 grad f + a2 J^T h + a1 J^T lbar + a1 (dlbar/dx)^T h)^T z

    with ``lbar`` the least-squares multiplier for ``T = I``. The Jacobian
    ``dlbar/dx`` is taken by central differences. The ``z``-energy carries
    the factor 1/2; that is the coefficient for which the time derivative
    produces ``-alpha ||z||^2``.
    """
    if not (a1 > 0 and a2 > 0 and alpha > 0):
        raise ValueError("a1, a2 and alpha must be positive")
    if problem.kind is not ConstraintKind.EQUALITY:
        raise ValueError("momentum merit is defined for equality constraints")
    if not problem.metric.is_identity:
        raise MetricNotIdentity("momentum merit assumes T = I")
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    ev = evaluate(problem, x)
    lbar = lambda_bar(ev)
    dlbar = finite_diff_jacobian(lambda y: lambda_bar(evaluate(problem, y)), x)
    J, h = ev.jac_h, ev.h
    cross = a1 * ev.grad_f + a2 * (J.T @ h) + a1 * (J.T @ lbar) + a1 * (dlbar.T @ h)
    return (a1 * alpha * ev.f + 0.5 * a2 * alpha * float(h @ h)
            + a1 * alpha * float(lbar @ h) + 0.5 * float(z @ z) + float(cross @ z))


def affine_momentum_constants(Q, A, K, a1=1.0):
    """Coefficients that make :func:`momentum_merit` a Lyapunov function.

    For ``f = 1/2 x^T Q x + c^T x`` and ``h = A x + b`` every constant in the
    merit decrease condition is available in closed form::

        L_f  = ||Q||                 M^2 = ||A||^2      Hbar = 0
        L_1  = ||(AA^T)^{-1} A Q||   D^2 = ||(AA^T)^{-1}||
        L_2  = ||P Q + Q P||,        P = A^T (AA^T)^{-1} A

    Returns a dict with these plus ``a2`` (the smallest admissible value)
    and ``alpha_min``, the damping lower bound. In the ``a2`` condition the
    larger of ``L_1`` and ``L_2`` multiplies ``D``, which covers both the
    stated bound and the term it is derived from.
    """
    Q = np.asarray(Q, dtype=float)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    K = np.atleast_1d(np.asarray(K, dtype=float))
    AAt = A @ A.T
    AAt_inv = np.linalg.inv(AAt)
    P = A.T @ AAt_inv @ A
    L_f = np.linalg.norm(Q, 2)
    L_1 = np.linalg.norm(AAt_inv @ A @ Q, 2)
    L_2 = np.linalg.norm(P @ Q + Q @ P, 2)
    M2 = np.linalg.norm(A, 2) ** 2
    D = np.sqrt(np.linalg.norm(AAt_inv, 2))
    kmin, kmax = float(np.min(K)), float(np.max(K))
    a2 = a1 * (4.0 * kmax / kmin * max(L_1, L_2) * D + L_1 ** 2 / kmin)
    alpha_min = (a1 * (L_f + L_2) + a2 * M2 + 1.0 / a1
                 + 2.0 * kmax * D ** 2 / a2) + 1.0
    return {"L_f": L_f, "L_1": L_1, "L_2": L_2, "M2": M2, "D": D,
            "Hbar": 0.0, "a1": a1, "a2": a2, "alpha_min": alpha_min}
