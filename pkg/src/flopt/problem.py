"""Problem instances, metrics and derivative validation."""

import enum
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import linalg

from .errors import (
    DimensionMismatch,
    HessianUnavailable,
    NonFiniteEvaluation,
    NotPositiveDefinite,
)
from .kernel import DeterministicRng, finite_diff_jacobian

__all__ = [
    "ConstraintKind",
    "ObjectiveSpec",
    "ConstraintSpec",
    "MetricSpec",
    "ProblemInstance",
    "EvalRecord",
    "DerivativeReport",
    "evaluate",
    "metric_apply",
    "validate_derivatives",
]


class ConstraintKind(enum.Enum):
    EQUALITY = "eq"
    INEQUALITY = "ineq"


@dataclass(frozen=True)
class ObjectiveSpec:
    """Objective ``f`` with gradient and optional Hessian.

    All callables must be pure functions of ``x``.
    """

    dim: int
    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    hessian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    known_lower_bound: Optional[float] = None


@dataclass(frozen=True)
class ConstraintSpec:
    """``m`` constraints ``h(x) = 0`` or ``h(x) <= 0`` with Jacobian."""

    count: int
    value: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray]
    kind: ConstraintKind = ConstraintKind.EQUALITY

    @classmethod
    def none(cls, dim):
        """Zero constraints (plain gradient flow)."""
        return cls(0, lambda x: np.zeros(0), lambda x: np.zeros((0, dim)))


@dataclass(frozen=True)
class MetricSpec:
    """Positive definite preconditioner ``T(x)`` of the primal flow.

    ``variant`` is ``"identity"``, ``"inverse_hessian"`` or ``"custom"``.
    The spectral bounds are declared by the user, not estimated.
    """

    variant: str = "identity"
    matrix: Optional[Callable[[np.ndarray], np.ndarray]] = None
    hessian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    lambda_min: float = 1.0
    lambda_max: float = 1.0

    def __post_init__(self):
        if self.variant not in ("identity", "inverse_hessian", "custom"):
            raise ValueError(f"unknown metric variant {self.variant!r}")
        if self.variant == "custom" and self.matrix is None:
            raise ValueError("custom metric needs a matrix callable")
        if not 0 < self.lambda_min <= self.lambda_max:
            raise ValueError("need 0 < lambda_min <= lambda_max")

    @classmethod
    def identity(cls):
        return cls("identity")

    @classmethod
    def inverse_hessian(cls, hessian, lambda_min=1.0, lambda_max=1.0):
        if hessian is None:
            raise HessianUnavailable("objective has no Hessian")
        return cls("inverse_hessian", hessian=hessian,
                   lambda_min=lambda_min, lambda_max=lambda_max)

    @classmethod
    def custom(cls, matrix, lambda_min=1.0, lambda_max=1.0):
        return cls("custom", matrix=matrix, lambda_min=lambda_min,
                   lambda_max=lambda_max)

    @property
    def is_identity(self):
        return self.variant == "identity"

    def inverse_matrix(self, x):
        """Dense ``T(x)^{-1}``; used only by the reference SQP oracles."""
        x = np.asarray(x, dtype=float)
        if self.variant == "identity":
            return np.eye(x.size)
        if self.variant == "inverse_hessian":
            return np.asarray(self.hessian(x), dtype=float)
        return np.linalg.inv(np.asarray(self.matrix(x), dtype=float))


@dataclass(frozen=True)
class ProblemInstance:
    objective: ObjectiveSpec
    constraints: ConstraintSpec
    metric: MetricSpec = field(default_factory=MetricSpec.identity)
    name: str = "problem"
    # generator-specific data (Q, A, x_star, mu, ...); never used by solvers
    info: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.objective.dim < 1:
            raise DimensionMismatch("objective dimension must be positive")
        if self.constraints.count < 0:
            raise DimensionMismatch("constraint count must be nonnegative")

    @property
    def n(self):
        return self.objective.dim

    @property
    def m(self):
        return self.constraints.count

    @property
    def kind(self):
        return self.constraints.kind

    def with_metric(self, metric):
        return ProblemInstance(self.objective, self.constraints, metric,
                               self.name, self.info)


@dataclass(frozen=True)
class EvalRecord:
    x: np.ndarray
    f: float
    grad_f: np.ndarray
    h: np.ndarray
    jac_h: np.ndarray


def _check_finite(name, value):
    if not np.all(np.isfinite(value)):
        raise NonFiniteEvaluation(name)


def evaluate(problem, x):
    """Evaluate ``f``, ``grad f``, ``h`` and ``J_h`` once at ``x``."""
    x = np.asarray(x, dtype=float)
    n, m = problem.n, problem.m
    if x.shape != (n,):
        raise DimensionMismatch(f"x has shape {x.shape}, expected {(n,)}")
    f = float(problem.objective.value(x))
    _check_finite("f", f)
    g = np.asarray(problem.objective.gradient(x), dtype=float).reshape(-1)
    if g.shape != (n,):
        raise DimensionMismatch(f"gradient has shape {g.shape}, expected {(n,)}")
    _check_finite("grad_f", g)
    h = np.asarray(problem.constraints.value(x), dtype=float).reshape(-1)
    if h.shape != (m,):
        raise DimensionMismatch(f"h has shape {h.shape}, expected {(m,)}")
    _check_finite("h", h)
    if m:
        J = np.atleast_2d(np.asarray(problem.constraints.jacobian(x), dtype=float))
    else:
        J = np.zeros((0, n))
    if J.shape != (m, n):
        raise DimensionMismatch(f"Jacobian has shape {J.shape}, expected {(m, n)}")
    _check_finite("jac_h", J)
    return EvalRecord(x, f, g, h, J)


def metric_apply(metric, x, v):
    """Return ``T(x) @ v`` for a vector or an ``(n, k)`` block ``v``.

    The inverse-Hessian metric solves ``hess f(x) w = v`` by Cholesky and
    never forms the inverse.

    Raises
    ------
    NotPositiveDefinite
        If the Hessian is not SPD at ``x`` (FL-Newton does not apply there).
    """
    v = np.asarray(v, dtype=float)
    x = np.asarray(x, dtype=float)
    if v.shape[0] != x.size:
        raise DimensionMismatch(f"v has leading dimension {v.shape[0]}, expected {x.size}")
    if metric.variant == "identity":
        return v.copy()
    if metric.variant == "custom":
        return np.asarray(metric.matrix(x), dtype=float) @ v
    H = np.asarray(metric.hessian(x), dtype=float)
    _check_finite("hessian", H)
    try:
        factor = linalg.cho_factor(H, lower=True, check_finite=False)
    except linalg.LinAlgError:
        raise NotPositiveDefinite("Hessian is not positive definite at x") from None
    return linalg.cho_solve(factor, v, check_finite=False)


@dataclass
class DerivativeReport:
    samples: int
    max_rel_error: dict
    threshold: float = 1e-4
    failures: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    @property
    def passed(self):
        return not self.failures

    def __str__(self):
        lines = [f"derivative check over {self.samples} points "
                 f"(threshold {self.threshold:g}):"]
        for key, err in self.max_rel_error.items():
            flag = "FAIL" if key in self.failures else "ok"
            lines.append(f"  {key:<10s} max rel err {err:.3e}  {flag}")
        lines.extend(f"  note: {note}" for note in self.notes)
        lines.append("PASS" if self.passed else "FAIL")
        return "\n".join(lines)


def _rel_error(analytic, numeric):
    analytic = np.asarray(analytic, dtype=float)
    numeric = np.asarray(numeric, dtype=float)
    if analytic.shape != numeric.shape:
        return np.inf
    if analytic.size == 0:
        return 0.0
    return float(np.max(np.abs(analytic - numeric))
                 / (1.0 + np.max(np.abs(numeric))))


def validate_derivatives(problem, samples=20, rng=None, threshold=1e-4):
    """Compare user derivatives against central finite differences.

    Test points have standard normal entries drawn from ``rng`` (seed 0 if
    omitted). The report holds the worst relative error per field; a field
    fails when that error exceeds ``threshold`` or shapes disagree.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = rng if rng is not None else DeterministicRng(0)
    obj, con = problem.objective, problem.constraints
    n, m = problem.n, problem.m
    errors = {"gradient": 0.0}
    notes = []
    if m > 0:
        errors["jacobian"] = 0.0
    else:
        notes.append("m = 0: Jacobian check skipped")
    if obj.hessian is not None:
        errors["hessian"] = 0.0
    else:
        notes.append("no Hessian supplied: Hessian check skipped")

    for _ in range(samples):
        x = rng.normal_array(n)
        try:
            g = np.asarray(obj.gradient(x), dtype=float).reshape(-1)
            fd = finite_diff_jacobian(obj.value, x).reshape(-1)
            errors["gradient"] = max(errors["gradient"], _rel_error(g, fd))
        except (ValueError, NonFiniteEvaluation):
            errors["gradient"] = np.inf
        if m > 0:
            try:
                J = np.asarray(con.jacobian(x), dtype=float)
                fd = finite_diff_jacobian(con.value, x)
                errors["jacobian"] = max(errors["jacobian"], _rel_error(J, fd))
            except (ValueError, NonFiniteEvaluation):
                errors["jacobian"] = np.inf
        if obj.hessian is not None:
            try:
                H = np.asarray(obj.hessian(x), dtype=float)
                fd = finite_diff_jacobian(obj.gradient, x)
                err = _rel_error(H, fd)
                if H.shape == (n, n) and np.max(np.abs(H - H.T), initial=0.0) > 1e-8:
                    notes.append("Hessian is not symmetric")
                    err = np.inf
                errors["hessian"] = max(errors["hessian"], err)
            except (ValueError, NonFiniteEvaluation):
                errors["hessian"] = np.inf

    failures = [k for k, v in errors.items() if not v <= threshold]
    return DerivativeReport(samples, errors, threshold, failures, notes)
