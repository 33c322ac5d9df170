"""Dense linear-algebra helpers and a portable seeded random generator."""

import math
import warnings

import numpy as np
from scipy import linalg

from .errors import DimensionMismatch, NonFiniteEvaluation, NotPositiveDefinite

__all__ = [
    "DeterministicRng",
    "spd_solve",
    "gram",
    "standard_normal",
    "finite_diff_jacobian",
]

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_TWO_M53 = 2.0 ** -53


class DeterministicRng:
    """splitmix64 generator with a Box-Muller normal sampler.

    The stream is fully specified so that the same seed produces the same
    draws on every platform:

    * ``next_u64``: ``state += 0x9E3779B97F4A7C15`` then the splitmix64
      finalizer.
    * ``uniform``: top 53 bits of one draw scaled to ``[0, 1)``.
    * ``standard_normal``: ``u1 = (bits53 + 1) * 2**-53`` in ``(0, 1]``,
      ``u2 = bits53 * 2**-53`` in ``[0, 1)``, returns
      ``sqrt(-2 ln u1) * cos(2 pi u2)``. Each normal consumes exactly two
      64-bit draws; the sine branch is discarded.
    """

    def __init__(self, seed=0):
        self.state = int(seed) & _MASK64

    def next_u64(self):
        self.state = (self.state + _GOLDEN) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def uniform(self):
        return (self.next_u64() >> 11) * _TWO_M53

    def standard_normal(self):
        u1 = ((self.next_u64() >> 11) + 1) * _TWO_M53
        u2 = (self.next_u64() >> 11) * _TWO_M53
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)

    def normal_array(self, shape):
        """Array of standard normals filled in row-major (C) order."""
        size = int(np.prod(shape, dtype=np.int64))
        out = np.fromiter((self.standard_normal() for _ in range(size)),
                          dtype=float, count=size)
        return out.reshape(shape)

    def uniform_array(self, shape):
        size = int(np.prod(shape, dtype=np.int64))
        out = np.fromiter((self.uniform() for _ in range(size)),
                          dtype=float, count=size)
        return out.reshape(shape)


def standard_normal(rng):
    """Draw one standard normal from ``rng`` (see :class:`DeterministicRng`)."""
    return rng.standard_normal()


def spd_solve(G, b):
    """Solve ``G x = b`` for symmetric positive definite ``G``.

    Uses a Cholesky factorization. If it fails, one retry is made with
    ``1e-12 * trace(G) / dim`` added to the diagonal. A solution is only
    returned if ``||G x - b|| <= 1e-10 (1 + ||b||)``.

    Parameters
    ----------
    G : array_like, shape (m, m)
    b : array_like, shape (m,) or (m, k)

    Raises
    ------
    NotPositiveDefinite
        If the jittered factorization also fails. At an iterate of the
        solver this means the constraint Jacobian has lost full row rank.
    """
    G = np.asarray(G, dtype=float)
    b = np.asarray(b, dtype=float)
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise DimensionMismatch(f"G must be square, got shape {G.shape}")
    m = G.shape[0]
    if b.shape[0] != m:
        raise DimensionMismatch(f"b has leading dimension {b.shape[0]}, expected {m}")
    if m == 0:
        return np.zeros_like(b)
    if not np.all(np.isfinite(G)):
        raise NotPositiveDefinite("matrix has non-finite entries")
    try:
        factor = linalg.cho_factor(G, lower=True, check_finite=False)
    except linalg.LinAlgError:
        jitter = 1e-12 * np.trace(G) / m
        if not jitter > 0:
            raise NotPositiveDefinite("Cholesky failed and trace(G) <= 0") from None
        try:
            factor = linalg.cho_factor(G + jitter * np.eye(m), lower=True,
                                       check_finite=False)
        except linalg.LinAlgError:
            raise NotPositiveDefinite(
                "Cholesky failed after diagonal jitter") from None
    x = linalg.cho_solve(factor, b, check_finite=False)
    # a numerically singular G can factor with a tiny pivot; the residual shows it
    if not np.linalg.norm(G @ x - b) <= 1e-10 * (1.0 + np.linalg.norm(b)):
        raise NotPositiveDefinite("matrix is numerically singular")
    return x


def gram(J, T=None):
    """Return the symmetrized product ``J T J^T``.

    ``T`` may be ``None`` (identity), an ``(n, n)`` array, or a callable
    mapping an ``(n, k)`` block to ``T @ block``.
    """
    J = np.atleast_2d(np.asarray(J, dtype=float))
    m, n = J.shape
    if m > n:
        warnings.warn(f"gram: more rows than columns ({m} > {n}); "
                      "the result is singular", RuntimeWarning, stacklevel=2)
    if T is None:
        TJt = J.T
    elif callable(T):
        TJt = np.asarray(T(J.T), dtype=float)
    else:
        T = np.asarray(T, dtype=float)
        if T.shape != (n, n):
            raise DimensionMismatch(f"T has shape {T.shape}, expected {(n, n)}")
        TJt = T @ J.T
    if TJt.shape != (n, m):
        raise DimensionMismatch(f"T J^T has shape {TJt.shape}, expected {(n, m)}")
    G = J @ TJt
    return 0.5 * (G + G.T)


def finite_diff_jacobian(fn, x, h=None):
    """Central-difference Jacobian of ``fn`` at ``x``.

    Column ``j`` is ``(fn(x + h e_j) - fn(x - h e_j)) / (2h)``; the default
    step is ``1e-5 * (1 + ||x||_inf)``. Scalar-valued ``fn`` yields a
    ``(1, n)`` matrix.
    """
    x = np.asarray(x, dtype=float)
    if h is None:
        h = 1e-5 * (1.0 + np.max(np.abs(x), initial=0.0))
    if not h > 0:
        raise ValueError("finite-difference step must be positive")
    n = x.size
    cols = []
    for j in range(n):
        e = np.zeros(n)
        e[j] = h
        fp = np.atleast_1d(np.asarray(fn(x + e), dtype=float))
        fm = np.atleast_1d(np.asarray(fn(x - e), dtype=float))
        if not (np.all(np.isfinite(fp)) and np.all(np.isfinite(fm))):
            raise NonFiniteEvaluation("fn", f"non-finite output perturbing coordinate {j}")
        cols.append((fp - fm) / (2.0 * h))
    if not cols:
        m = np.atleast_1d(np.asarray(fn(x), dtype=float)).size
        return np.zeros((m, 0))
    return np.stack(cols, axis=1)
