"""Multiplier (control input) computation.

Equality constraints get the closed form ``lambda = -G^{-1}(J T grad f - K h)``
with ``G = J T J^T``. Inequality constraints need the nonnegative QP

    min_{lambda >= 0}  1/2 lambda^T G lambda + c^T lambda,

whose optimality system is ``G lambda + c = s``, ``s >= 0``, ``lambda >= 0``,
``s^T lambda = 0``.
"""

import itertools
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import MaxIterations, NoFeasibleCandidate, TooManyConstraints, Unbounded
from .kernel import spd_solve
from .problem import metric_apply

__all__ = [
    "MultiplierSolution",
    "metric_blocks",
    "equality_multiplier",
    "nnqp_solve",
    "nnqp_brute_force",
    "nnqp_kkt_residual",
    "nnqp_objective",
]


@dataclass(frozen=True)
class MultiplierSolution:
    lam: np.ndarray
    slack: np.ndarray
    kkt_residual: float
    active_set: tuple

    @property
    def lambda_inf_norm(self):
        return float(np.max(np.abs(self.lam), initial=0.0))


def _gains(K, m):
    K = np.asarray(K, dtype=float)
    if K.ndim == 0:
        K = np.full(m, float(K))
    elif K.ndim == 2:
        K = np.diag(K).copy()
    if K.shape != (m,):
        raise ValueError(f"gain vector has shape {K.shape}, expected {(m,)}")
    return K


def metric_blocks(ev, metric):
    """Return ``(G, JTg, Tg, TJt)`` at an evaluation point.

    ``G = J T J^T`` (symmetrized), ``JTg = J T grad f``, ``Tg = T grad f`` and
    ``TJt = T J^T``. ``T`` is applied once to the stacked block.
    """
    stacked = np.column_stack([ev.grad_f, ev.jac_h.T])
    TS = metric_apply(metric, ev.x, stacked)
    Tg, TJt = TS[:, 0], TS[:, 1:]
    G = ev.jac_h @ TJt
    G = 0.5 * (G + G.T)
    return G, ev.jac_h @ Tg, Tg, TJt


def equality_multiplier(ev, metric, K, blocks=None):
    """Feedback-linearizing multiplier for equality constraints.

    Solves ``(J T J^T) lambda = -(J T grad f - K h)`` so that the closed loop
    obeys ``d/dt h = -K h``.

    Raises
    ------
    NotPositiveDefinite
        If ``J T J^T`` cannot be factored (loss of LICQ at ``ev.x``).
    """
    m = ev.h.size
    K = _gains(K, m)
    G, JTg, _, _ = blocks if blocks is not None else metric_blocks(ev, metric)
    rhs = -(JTg - K * ev.h)
    lam = spd_solve(G, rhs)
    residual = float(np.linalg.norm(G @ lam - rhs))
    return MultiplierSolution(lam, np.zeros(m), residual,
                              tuple(int(i) for i in np.flatnonzero(lam > 0)))


def nnqp_objective(G, c, lam):
    return float(0.5 * lam @ G @ lam + c @ lam)


def nnqp_kkt_residual(G, c, lam):
    """``max(||min(lam,0)||_inf, ||min(G lam + c, 0)||_inf, |lam^T (G lam + c)|)``."""
    G = np.asarray(G, dtype=float)
    c = np.asarray(c, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if lam.size == 0:
        return 0.0
    s = G @ lam + c
    return float(max(0.0, np.max(-np.minimum(lam, 0.0)),
                     np.max(-np.minimum(s, 0.0)),
                     abs(lam @ s)))


def _solution(G, c, lam):
    lam = np.maximum(lam, 0.0)
    s = G @ lam + c
    return MultiplierSolution(lam, s, nnqp_kkt_residual(G, c, lam),
                              tuple(int(i) for i in np.flatnonzero(lam > 0)))


def _reduced_solve(Gpp, rhs):
    """Solve ``Gpp z = rhs`` for PSD ``Gpp``.

    Returns ``(z, None)`` on success, or ``(None, d)`` when the system is
    inconsistent; ``d`` then spans null(Gpp) with ``rhs . d > 0``, i.e. the
    reduced objective decreases without bound along ``d``.
    """
    try:
        factor = linalg.cho_factor(Gpp, lower=True, check_finite=False)
        z = linalg.cho_solve(factor, rhs, check_finite=False)
        if np.all(np.isfinite(z)):
            return z, None
    except linalg.LinAlgError:
        pass
    w, V = np.linalg.eigh(Gpp)
    cut = 1e-12 * max(np.max(np.abs(w)), 1.0)
    keep = w > cut
    coef = V.T @ rhs
    d = V[:, ~keep] @ coef[~keep]
    if np.linalg.norm(d) > 1e-10 * (1.0 + np.linalg.norm(rhs)):
        return None, d
    z = V[:, keep] @ (coef[keep] / w[keep])
    return z, None


def nnqp_solve(G, c, max_iter=None):
    """Minimize ``1/2 lam^T G lam + c^T lam`` over ``lam >= 0``.

    Primal active-set method in the style of Lawson-Hanson NNLS. Starting
    from ``lam = 0``, the free index with the most negative gradient enters
    (ties go to the smallest index); the reduced system on the free set is
    solved exactly and a ratio test keeps iterates feasible. Singular
    reduced systems use the minimum-norm solution.

    Parameters
    ----------
    G : array_like, shape (m, m)
        Symmetric positive semidefinite.
    c : array_like, shape (m,)
    max_iter : int, optional
        Cap on reduced solves, default ``50 * m``.

    Returns
    -------
    MultiplierSolution
        ``slack`` holds ``s = G lam + c``.

    Raises
    ------
    Unbounded
        If the objective is unbounded below on the orthant.
    MaxIterations
        If the iteration cap is reached.
    """
    G = np.asarray(G, dtype=float)
    c = np.asarray(c, dtype=float)
    m = c.size
    if G.shape != (m, m):
        raise ValueError(f"G has shape {G.shape}, expected {(m, m)}")
    if m == 0:
        return MultiplierSolution(np.zeros(0), np.zeros(0), 0.0, ())
    G = 0.5 * (G + G.T)
    max_iter = 50 * m if max_iter is None else max_iter
    tol = 1e-13 * (1.0 + np.max(np.abs(c)) + np.max(np.abs(G)))

    lam = np.zeros(m)
    free = np.zeros(m, dtype=bool)
    it = 0
    while True:
        grad = G @ lam + c
        score = np.where(free, -np.inf, -grad)
        j = int(np.argmax(score))
        if score[j] <= tol:
            break
        free[j] = True
        while True:
            it += 1
            if it > max_iter:
                raise MaxIterations(f"nnqp_solve: {max_iter} iterations without convergence")
            idx = np.flatnonzero(free)
            z, ray = _reduced_solve(G[np.ix_(idx, idx)], -c[idx])
            cur = lam[idx]
            if ray is not None:
                if np.all(ray >= 0):
                    raise Unbounded("nonnegative QP is unbounded below")
                neg = np.flatnonzero(ray < 0)
                ratios = cur[neg] / -ray[neg]
                k = neg[int(np.argmin(ratios))]
                cur = cur + float(np.min(ratios)) * ray
            else:
                if np.all(z > 0):
                    lam[:] = 0.0
                    lam[idx] = z
                    break
                neg = np.flatnonzero(z <= 0)
                denom = cur[neg] - z[neg]
                with np.errstate(divide="ignore", invalid="ignore"):
                    ratios = np.where(denom > 0, cur[neg] / denom, 0.0)
                k = neg[int(np.argmin(ratios))]
                cur = cur + float(np.min(ratios)) * (z - cur)
            cur[k] = 0.0
            cur = np.maximum(cur, 0.0)
            lam[idx] = cur
            free[idx[cur <= 0.0]] = False
            lam[~free] = 0.0
            if not free.any():
                break
    sol = _solution(G, c, lam)
    if np.max(lam) > 1e8 and sol.kkt_residual > 1e-9 * (1.0 + np.linalg.norm(c)):
        raise Unbounded("multiplier norm exceeded 1e8 without reaching optimality")
    return sol


def nnqp_brute_force(G, c):
    """Reference NNQP solver by enumeration of all ``2^m`` active sets.

    For every candidate free set ``A`` the system ``G_AA lam_A = -c_A`` is
    solved (minimum norm if singular); a candidate is kept when
    ``lam_A >= -tol`` and ``(G lam + c)_i >= -tol`` off ``A``. The least
    objective wins, ties going to the smaller norm and then to the earlier
    set.
    """
    G = np.asarray(G, dtype=float)
    c = np.asarray(c, dtype=float)
    m = c.size
    if m > 12:
        raise TooManyConstraints(f"brute force limited to m <= 12, got {m}")
    if m == 0:
        return MultiplierSolution(np.zeros(0), np.zeros(0), 0.0, ())
    G = 0.5 * (G + G.T)
    scale = 1.0 + np.max(np.abs(c)) + np.max(np.abs(G))
    best = None
    for r in range(m + 1):
        for subset in itertools.combinations(range(m), r):
            idx = np.array(subset, dtype=int)
            lam = np.zeros(m)
            if idx.size:
                Gaa = G[np.ix_(idx, idx)]
                sol = np.linalg.lstsq(Gaa, -c[idx], rcond=None)[0]
                if np.linalg.norm(Gaa @ sol + c[idx]) > 1e-9 * scale:
                    continue
                lam[idx] = sol
            tol = 1e-10 * scale * (1.0 + np.max(np.abs(lam)))
            if np.any(lam < -tol):
                continue
            s = G @ lam + c
            off = np.ones(m, dtype=bool)
            off[idx] = False
            if np.any(s[off] < -tol):
                continue
            key = (nnqp_objective(G, c, lam), float(np.linalg.norm(lam)))
            if best is None or key[0] < best[0][0] - 1e-14 * scale or (
                    abs(key[0] - best[0][0]) <= 1e-14 * scale and key[1] < best[0][1]):
                best = (key, lam)
    if best is None:
        raise NoFeasibleCandidate("no active set satisfies the KKT system")
    return _solution(G, c, best[1])
