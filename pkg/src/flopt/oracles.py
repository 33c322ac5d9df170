"""Independent reference solvers for cross-validation.

Nothing here shares a linear-algebra path with the solvers: the SQP
subproblems are solved from the full block KKT matrix by LU, and the
inequality subproblem by enumerating active sets.
"""

import itertools
import math
import warnings

import numpy as np
from scipy import linalg

from .errors import Infeasible, NotPositiveDefinite, SingularKktMatrix, TooManyConstraints
from .problem import evaluate

__all__ = [
    "sqp_equality_oracle",
    "sqp_inequality_oracle",
    "momentum_projected_gradient_oracle",
    "affine_projection",
    "exponential_decay_reference",
    "strongly_convex_rate_reference",
]

MAX_ENUMERATED = 12


def _kkt_solve(Hs, g, J, h):
    """Solve ``[[Hs, J^T], [J, 0]] (d, lam) = (-g, -h)`` by dense LU."""
    n, m = g.size, h.size
    K = np.zeros((n + m, n + m))
    K[:n, :n] = Hs
    K[:n, n:] = J.T
    K[n:, :n] = J
    rhs = np.concatenate([-g, -h])
    with warnings.catch_warnings():
        # singularity is detected from the pivots below
        warnings.simplefilter("ignore", linalg.LinAlgWarning)
        lu, piv = linalg.lu_factor(K, check_finite=False)
    pivots = np.abs(np.diag(lu))
    if not np.all(np.isfinite(lu)) or np.min(pivots) <= 1e-13 * max(np.max(pivots), 1.0):
        raise SingularKktMatrix("KKT matrix is singular (LICQ fails at x)")
    sol = linalg.lu_solve((lu, piv), rhs, check_finite=False)
    return sol[:n], sol[n:]


def _subproblem(problem, x, eta):
    ev = evaluate(problem, x)
    Hs = problem.metric.inverse_matrix(ev.x) / eta
    return ev, 0.5 * (Hs + Hs.T)


def sqp_equality_oracle(problem, x, eta, return_multiplier=False):
    """Step of the metric-weighted SQP method for ``h(x) = 0``.

    Minimizes ``grad f^T d + (1/2 eta) d^T T^{-1} d`` subject to
    ``h + J d = 0``.

    Returns
    -------
    ndarray
        ``x + d``, or ``(x + d, lam)`` when ``return_multiplier`` is set.

    Raises
    ------
    SingularKktMatrix
        If the block KKT matrix is singular.
    """
    if not eta > 0:
        raise ValueError("eta must be positive")
    ev, Hs = _subproblem(problem, x, eta)
    d, lam = _kkt_solve(Hs, ev.grad_f, ev.jac_h, ev.h)
    x_next = ev.x + d
    return (x_next, lam) if return_multiplier else x_next


def sqp_inequality_oracle(problem, x, eta, return_multiplier=False, feas_tol=1e-9,
                          dual_tol=1e-10):
    """Step of the SQP method for ``h(x) <= 0`` by active-set enumeration.

    Every subset ``A`` of rows is tried as the active set: the equality
    subproblem on ``A`` is solved and the candidate is kept if it satisfies
    all linearized constraints (to ``feas_tol``) and ``lam_A >= -dual_tol``.
    The candidate with the least subproblem objective is returned.

    Raises
    ------
    Infeasible
        No candidate survives (the linearized subproblem is infeasible).
    TooManyConstraints
        ``m > 12``.
    """
    if not eta > 0:
        raise ValueError("eta must be positive")
    m = problem.m
    if m > MAX_ENUMERATED:
        raise TooManyConstraints(f"enumeration limited to m <= {MAX_ENUMERATED}, got {m}")
    ev, Hs = _subproblem(problem, x, eta)
    g, J, h = ev.grad_f, ev.jac_h, ev.h
    best = None
    for r in range(m + 1):
        for subset in itertools.combinations(range(m), r):
            idx = list(subset)
            try:
                d, lam_a = _kkt_solve(Hs, g, J[idx], h[idx])
            except SingularKktMatrix:
                continue
            if np.any(lam_a < -dual_tol) or np.any(h + J @ d > feas_tol):
                continue
            obj = float(g @ d + 0.5 * d @ Hs @ d)
            if best is None or obj < best[0]:
                lam = np.zeros(m)
                lam[idx] = lam_a
                best = (obj, d, lam)
    if best is None:
        raise Infeasible("linearized subproblem has no feasible active set")
    x_next = ev.x + best[1]
    return (x_next, np.maximum(best[2], 0.0)) if return_multiplier else x_next


def affine_projection(A, b, v):
    """Euclidean projection of ``v`` onto ``{x : A x + b = 0}``.

    ``(I - A^T (A A^T)^{-1} A) v - A^T (A A^T)^{-1} b``.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    try:
        factor = linalg.cho_factor(A @ A.T, lower=True, check_finite=False)
    except linalg.LinAlgError:
        raise NotPositiveDefinite("A A^T is singular") from None
    return v - A.T @ linalg.cho_solve(factor, A @ v + b, check_finite=False)


def momentum_projected_gradient_oracle(A, b, gradient, x, x_prev, beta, eta):
    """Heavy-ball projected gradient step for affine equality constraints.

    ``w = x + beta (x - x_prev)``, returns ``Proj(w - eta grad f(w))``.
    """
    x = np.asarray(x, dtype=float)
    w = x + beta * (x - np.asarray(x_prev, dtype=float))
    return affine_projection(A, b, w - eta * np.asarray(gradient(w), dtype=float))


def exponential_decay_reference(h0, k, t):
    """Closed-loop constraint values ``h_i(t) = exp(-k_i t) h_i(0)``.

    Entries whose magnitude falls below 1e-40 are returned as exact zeros.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    h0 = np.atleast_1d(np.asarray(h0, dtype=float))
    k = np.broadcast_to(np.asarray(k, dtype=float), h0.shape)
    out = np.exp(-k * t) * h0
    out[np.abs(out) < 1e-40] = 0.0
    return out


def strongly_convex_rate_reference(f0_gap, mu, t):
    """Upper envelope ``exp(-2 mu t) (f(x0) - f*)`` for strongly convex problems."""
    if not mu > 0:
        raise ValueError("mu must be positive")
    if f0_gap < 0 or t < 0:
        raise ValueError("f0_gap and t must be nonnegative")
    return math.exp(-2.0 * mu * t) * f0_gap
