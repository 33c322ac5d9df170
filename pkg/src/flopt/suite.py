"""Seeded built-in problems.

Every generator draws from :class:`~flopt.kernel.DeterministicRng`, so a
``(parameters, seed)`` pair always yields the same instance.
"""

import numpy as np
from scipy import linalg, special

from .kernel import DeterministicRng
from .problem import ConstraintKind, ConstraintSpec, ObjectiveSpec, ProblemInstance

__all__ = [
    "quadratic_problem",
    "random_qp",
    "constrained_logistic",
    "sphere_equality",
    "affine_equality_quadratic",
    "BUILTINS",
]

# seed offset used when a random_qp draw has to be replaced
_RESEED_OFFSET = 1_000_003


def quadratic_problem(Q, c, A, b, kind=ConstraintKind.EQUALITY, name="qp", info=None):
    """``min 1/2 x^T Q x + c^T x`` s.t. ``A x + b = 0`` (or ``<= 0``)."""
    Q = np.array(Q, dtype=float)
    c = np.array(c, dtype=float)
    n = c.size
    A = np.array(A, dtype=float).reshape(-1, n)
    b = np.array(b, dtype=float).reshape(-1)
    if Q.shape != (n, n) or b.size != A.shape[0]:
        raise ValueError(f"inconsistent QP data: Q {Q.shape}, c {c.shape}, "
                         f"A {A.shape}, b {b.shape}")
    for arr in (Q, c, A, b):
        arr.setflags(write=False)
    objective = ObjectiveSpec(
        n,
        lambda x: 0.5 * float(x @ Q @ x) + float(c @ x),
        lambda x: Q @ x + c,
        lambda x: Q,
    )
    constraints = ConstraintSpec(A.shape[0], lambda x: A @ x + b, lambda x: A,
                                 ConstraintKind(kind))
    data = {"Q": Q, "c": c, "A": A, "b": b}
    data.update(info or {})
    return ProblemInstance(objective, constraints, name=name, info=data)


def _random_qp_data(n, m, rng):
    R = rng.normal_array((n, n))
    c = rng.normal_array(n)
    A = rng.normal_array((m, n))
    b = rng.normal_array(m)
    A /= np.linalg.norm(A, axis=1, keepdims=True)
    Q = R.T @ R + 0.1 * np.eye(n)
    return 0.5 * (Q + Q.T), c, A, b


def random_qp(n, m, kind="eq", seed=0):
    """Random strongly convex QP with ``m`` unit-norm linear constraints.

    ``Q = R^T R + 0.1 I`` with Gaussian ``R``; ``A``, ``b``, ``c`` are
    Gaussian and the rows of ``A`` are rescaled to unit norm. Draw order is
    ``R`` (row-major), ``c``, ``A``, ``b``.

    For inequality instances a strictly feasible point
    ``x_feas = A^+ (-b - 1)`` (every constraint at -1) is stored in
    ``info["feasible_point"]``. If ``A`` lacks full row rank the draw is
    repeated with seed ``seed + 1000003 * k`` and the substitution is
    recorded in ``info["seed_used"]``.
    """
    kind = ConstraintKind(kind)
    if not 1 <= m <= n:
        raise ValueError(f"need 1 <= m <= n, got n={n}, m={m}")
    for attempt in range(100):
        used = seed + _RESEED_OFFSET * attempt
        Q, c, A, b = _random_qp_data(n, m, DeterministicRng(used))
        sv = np.linalg.svd(A, compute_uv=False)
        if sv[-1] > 1e-8 * sv[0]:
            break
    else:  # pragma: no cover - needs 100 rank-deficient Gaussian draws
        raise RuntimeError("could not draw a full-rank constraint matrix")
    x_feas = np.linalg.pinv(A) @ (-b - 1.0)
    info = {"seed": seed, "seed_used": used, "mu": float(np.linalg.eigvalsh(Q)[0]),
            "feasible_point": x_feas}
    return quadratic_problem(Q, c, A, b, kind, f"random_qp(n={n},m={m},{kind.value},seed={seed})",
                             info)


def constrained_logistic(C=5, per_client=200, d=10, eps=0.05, seed=0):
    """Fairness-constrained logistic regression over ``C`` clients.

    Minimizes the average loss ``Rbar(theta)`` subject to
    ``R_c(theta) - Rbar(theta) - eps <= 0`` for every client, where
    ``R_c`` is the mean logistic loss ``log(1 + exp(-y theta^T x))`` on
    client ``c``'s data.

    Data for client ``c = 1..C`` are drawn sample by sample: a label
    (``+1`` if a uniform draw is below 1/2, else ``-1``) and then ``d``
    Gaussian features shifted by ``0.5 c`` in the first coordinate. The
    Hessian of ``Rbar`` is supplied.
    """
    if C < 2 or per_client < 1 or d < 1:
        raise ValueError("need C >= 2, per_client >= 1, d >= 1")
    if not eps > 0:
        raise ValueError("eps must be positive")
    rng = DeterministicRng(seed)
    X = np.empty((C, per_client, d))
    Y = np.empty((C, per_client))
    for ci in range(C):
        for i in range(per_client):
            Y[ci, i] = 1.0 if rng.uniform() < 0.5 else -1.0
            X[ci, i] = rng.normal_array(d)
            X[ci, i, 0] += 0.5 * (ci + 1)
    YX = Y[..., None] * X
    for arr in (X, Y, YX):
        arr.setflags(write=False)

    def margins(theta):
        return YX @ theta  # (C, per_client)

    def client_losses(theta):
        return np.mean(np.logaddexp(0.0, -margins(theta)), axis=1)

    def client_grads(theta):
        w = special.expit(-margins(theta))
        return -np.einsum("cp,cpd->cd", w, YX) / per_client

    def value(theta):
        return float(np.mean(client_losses(theta)))

    def gradient(theta):
        return np.mean(client_grads(theta), axis=0)

    def hessian(theta):
        s = special.expit(margins(theta))
        w = (s * (1.0 - s)).reshape(-1)
        Z = X.reshape(-1, d)
        return (Z * w[:, None]).T @ Z / (C * per_client)

    def h(theta):
        losses = client_losses(theta)
        return losses - np.mean(losses) - eps

    def jac(theta):
        G = client_grads(theta)
        return G - np.mean(G, axis=0)

    objective = ObjectiveSpec(d, value, gradient, hessian, known_lower_bound=0.0)
    constraints = ConstraintSpec(C, h, jac, ConstraintKind.INEQUALITY)
    info = {"X": X, "Y": Y, "eps": eps, "seed": seed}
    return ProblemInstance(objective, constraints,
                           name=f"logistic(C={C},per_client={per_client},d={d},seed={seed})",
                           info=info)


def sphere_equality(n=3, seed=0):
    """``min c^T x`` on the unit sphere ``||x||^2 - 1 = 0`` with a random unit ``c``.

    Nonconvex; the KKT points are ``x = -c`` (minimum, ``lambda = 1/2``) and
    ``x = c``. No Hessian is supplied.
    """
    if n < 2:
        raise ValueError("sphere_equality needs n >= 2")
    rng = DeterministicRng(seed)
    c = rng.normal_array(n)
    c /= np.linalg.norm(c)
    c.setflags(write=False)
    objective = ObjectiveSpec(n, lambda x: float(c @ x), lambda x: c.copy(),
                              known_lower_bound=-1.0)
    constraints = ConstraintSpec(1, lambda x: np.array([x @ x - 1.0]),
                                 lambda x: 2.0 * x.reshape(1, -1))
    info = {"c": c, "x_star": -c, "lambda_star": np.array([0.5]), "seed": seed}
    return ProblemInstance(objective, constraints, name=f"sphere(n={n},seed={seed})",
                           info=info)


def affine_equality_quadratic(n=10, m=3, seed=0, mu=1.0, L=10.0):
    """Strongly convex QP with affine equality constraints and known optimum.

    ``Q = U diag(q) U^T`` with ``q_1 = mu`` and the remaining eigenvalues
    uniform in ``[mu + (L - mu)/6, L]``. The eigenvector of ``mu`` is the
    first constraint normal, so the Hessian restricted to the feasible set is
    bounded below by the second eigenvalue while the strong convexity
    constant of ``f`` stays exactly ``mu``.

    ``info`` holds ``Q, c, A, b, mu, L, x_star, lambda_star, f_star``.
    Draw order: ``A``, ``b``, ``c``, basis completion ``(n, n)``, eigenvalues.
    """
    if not 1 <= m < n:
        raise ValueError(f"need 1 <= m < n, got n={n}, m={m}")
    if not 0 < mu < L:
        raise ValueError("need 0 < mu < L")
    rng = DeterministicRng(seed)
    A = rng.normal_array((m, n))
    A /= np.linalg.norm(A, axis=1, keepdims=True)
    b = rng.normal_array(m)
    c = rng.normal_array(n)
    B = rng.normal_array((n, n))
    B[:, 0] = A[0]
    U, _ = np.linalg.qr(B)
    lo = mu + (L - mu) / 6.0
    q = np.concatenate([[mu], lo + (L - lo) * rng.uniform_array(n - 1)])
    Q = (U * q) @ U.T
    Q = 0.5 * (Q + Q.T)

    K = np.block([[Q, A.T], [A, np.zeros((m, m))]])
    sol = linalg.solve(K, np.concatenate([-c, -b]))
    x_star, lam_star = sol[:n], sol[n:]
    f_star = 0.5 * float(x_star @ Q @ x_star) + float(c @ x_star)
    info = {"mu": mu, "L": L, "x_star": x_star, "lambda_star": lam_star,
            "f_star": f_star, "seed": seed}
    return quadratic_problem(Q, c, A, b, ConstraintKind.EQUALITY,
                             f"affine_qp(n={n},m={m},seed={seed})", info)


BUILTINS = {
    "random_qp": random_qp,
    "logistic": constrained_logistic,
    "sphere": sphere_equality,
    "affine_qp": affine_equality_quadratic,
}
