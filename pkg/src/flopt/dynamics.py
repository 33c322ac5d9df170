"""Right-hand sides of the feedback-linearization vector fields."""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import MetricNotIdentity, ZeroDiagonal
from .kernel import spd_solve
from .multiplier import (
    MultiplierSolution,
    _gains,
    equality_multiplier,
    metric_blocks,
    nnqp_solve,
)
from .problem import ConstraintKind, EvalRecord, MetricSpec, evaluate

__all__ = [
    "GainConfig",
    "Derivative",
    "fl_equality_rhs",
    "fl_inequality_rhs",
    "fl_momentum_rhs",
    "fl_pi_rhs",
    "approx_inverse_diag",
]

_IDENTITY = MetricSpec.identity()


@dataclass(frozen=True)
class GainConfig:
    """Controller gains.

    ``K`` drives the proportional law ``dh/dt = -K h``; ``alpha`` is the
    momentum damping; ``Kp``/``Ki`` are the PI gains. Diagonal gains are
    stored as vectors of length ``m``.
    """

    K: np.ndarray
    alpha: float = 3.0
    Kp: Optional[np.ndarray] = None
    Ki: Optional[np.ndarray] = None

    def __post_init__(self):
        K = np.atleast_1d(np.asarray(self.K, dtype=float))
        object.__setattr__(self, "K", K)
        if np.any(K <= 0):
            raise ValueError("gains K must be positive")
        if self.alpha < 0:
            raise ValueError("damping alpha must be nonnegative")
        Kp = K if self.Kp is None else np.atleast_1d(np.asarray(self.Kp, dtype=float))
        Ki = np.zeros_like(K) if self.Ki is None else np.atleast_1d(
            np.asarray(self.Ki, dtype=float))
        if Kp.shape != K.shape or Ki.shape != K.shape:
            raise ValueError("Kp and Ki must match the shape of K")
        if np.any(Kp <= 0) or np.any(Ki < 0):
            raise ValueError("need Kp > 0 and Ki >= 0")
        object.__setattr__(self, "Kp", Kp)
        object.__setattr__(self, "Ki", Ki)

    @classmethod
    def uniform(cls, m, k, alpha=3.0, kp=None, ki=0.0):
        kp = k if kp is None else kp
        return cls(np.full(m, float(k)), alpha, np.full(m, float(kp)),
                   np.full(m, float(ki)))


@dataclass(frozen=True)
class Derivative:
    x_dot: np.ndarray
    multiplier: MultiplierSolution
    record: EvalRecord
    z_dot: Optional[np.ndarray] = None
    xi_dot: Optional[np.ndarray] = None


def _record(problem, x):
    return x if isinstance(x, EvalRecord) else evaluate(problem, x)


def _require_kind(problem, kind, what):
    if problem.kind is not kind:
        raise ValueError(f"{what} needs {kind.value} constraints, "
                         f"problem has {problem.kind.value}")


def _equality_field(ev, metric, K):
    if ev.h.size == 0:
        Tg = metric_blocks(ev, metric)[2]
        return -Tg, MultiplierSolution(np.zeros(0), np.zeros(0), 0.0, ())
    blocks = metric_blocks(ev, metric)
    sol = equality_multiplier(ev, metric, K, blocks=blocks)
    _, _, Tg, TJt = blocks
    return -(Tg + TJt @ sol.lam), sol


def _inequality_field(ev, metric, K):
    G, JTg, Tg, TJt = metric_blocks(ev, metric)
    c = JTg - _gains(K, ev.h.size) * ev.h
    sol = nnqp_solve(G, c)
    return -(Tg + TJt @ sol.lam), sol


def fl_equality_rhs(problem, gains, x, metric=None):
    """FL field for ``h(x) = 0``.

    ``x_dot = -T (grad f + J^T lambda)`` with the closed-form multiplier,
    which makes ``J x_dot = -K h``.
    """
    _require_kind(problem, ConstraintKind.EQUALITY, "fl_equality_rhs")
    ev = _record(problem, x)
    x_dot, sol = _equality_field(ev, metric or problem.metric, gains.K)
    return Derivative(x_dot, sol, ev)


def fl_inequality_rhs(problem, gains, x, metric=None):
    """FL field for ``h(x) <= 0``; the multiplier solves an NNQP.

    With ``G = J T J^T`` and ``c = J T grad f - K h`` the optimality system
    gives ``J x_dot = -K h - s`` with ``s >= 0``.
    """
    _require_kind(problem, ConstraintKind.INEQUALITY, "fl_inequality_rhs")
    ev = _record(problem, x)
    x_dot, sol = _inequality_field(ev, metric or problem.metric, gains.K)
    return Derivative(x_dot, sol, ev)


def fl_momentum_rhs(problem, gains, x, z, metric=None):
    """Second-order FL field ``x_dot = z``, ``z_dot = -alpha z - (grad f + J^T lambda)``.

    The multiplier is computed with ``T = I`` (closed form for equalities,
    NNQP on ``J J^T`` for inequalities).
    """
    metric = metric or problem.metric
    if not metric.is_identity:
        raise MetricNotIdentity("momentum dynamics are defined for T = I only")
    ev = _record(problem, x)
    z = np.asarray(z, dtype=float)
    if z.shape != ev.x.shape:
        raise ValueError(f"z has shape {z.shape}, expected {ev.x.shape}")
    if problem.kind is ConstraintKind.EQUALITY:
        force, sol = _equality_field(ev, _IDENTITY, gains.K)
    else:
        force, sol = _inequality_field(ev, _IDENTITY, gains.K)
    return Derivative(z.copy(), sol, ev, z_dot=-gains.alpha * z + force)


def approx_inverse_diag(J):
    """Diagonal approximation ``diag(J J^T)^{-1}``, returned as a vector."""
    J = np.atleast_2d(np.asarray(J, dtype=float))
    d = np.einsum("ij,ij->i", J, J)
    if np.any(d <= 1e-14):
        raise ZeroDiagonal("J J^T has a (near) zero diagonal entry")
    return 1.0 / d


def fl_pi_rhs(problem, gains, x, xi, inverse_mode="exact"):
    """FL field with a PI constraint controller (equality constraints, T = I).

    ``lambda = -F (J grad f - (Kp h + Ki xi))``, ``x_dot = -(grad f + J^T lambda)``
    and ``xi_dot = h``. ``F`` is ``(J J^T)^{-1}`` in ``"exact"`` mode or
    ``diag(J J^T)^{-1}`` in ``"diag"`` mode.
    """
    _require_kind(problem, ConstraintKind.EQUALITY, "fl_pi_rhs")
    ev = _record(problem, x)
    xi = np.asarray(xi, dtype=float)
    if xi.shape != ev.h.shape:
        raise ValueError(f"xi has shape {xi.shape}, expected {ev.h.shape}")
    J, g = ev.jac_h, ev.grad_f
    r = J @ g - (gains.Kp * ev.h + gains.Ki * xi)
    if inverse_mode == "exact":
        G = J @ J.T
        lam = -spd_solve(0.5 * (G + G.T), r)
    elif inverse_mode == "diag":
        lam = -approx_inverse_diag(J) * r
    else:
        raise ValueError(f"unknown inverse_mode {inverse_mode!r}")
    sol = MultiplierSolution(lam, np.zeros(lam.size), 0.0,
                             tuple(int(i) for i in np.flatnonzero(lam > 0)))
    return Derivative(-(g + J.T @ lam), sol, ev, xi_dot=ev.h.copy())
