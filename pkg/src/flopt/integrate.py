"""Time stepping of the FL flows and the discrete momentum-SQP scheme.

Explicit Euler with ``K = I/dt`` reproduces an SQP step exactly; RK4 is
provided for checking continuous-time behaviour at small ``dt``.
"""

import csv
import enum
import io
import time
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .diagnostics import kkt_gap
from .dynamics import (
    GainConfig,
    fl_equality_rhs,
    fl_inequality_rhs,
    fl_momentum_rhs,
    fl_pi_rhs,
)
from .errors import FLError, NonFiniteEvaluation, NonFiniteState
from .kernel import spd_solve
from .problem import ConstraintKind, MetricSpec, evaluate

__all__ = [
    "Method",
    "Scheme",
    "SolverConfig",
    "SolverState",
    "TrajectoryTrace",
    "TRACE_COLUMNS",
    "rhs",
    "step",
    "momentum_sqp_step",
    "run",
]

TRACE_COLUMNS = ("step", "t", "f", "kkt_gap", "merit", "max_violation",
                 "lambda_inf_norm")
DIVERGENCE_NORM = 1e12
DEFAULT_RHO = 1e3


class Method(enum.Enum):
    FL_PROXIMAL = "fl-proximal"
    FL_NEWTON = "fl-newton"
    FL_INEQUALITY = "fl-ineq"
    FL_MOMENTUM = "fl-momentum"
    FL_PI_EXACT = "fl-pi-exact"
    FL_PI_DIAG = "fl-pi-diag"
    MOMENTUM_SQP = "momentum-sqp"


class Scheme(enum.Enum):
    EULER = "euler"
    RK4 = "rk4"


@dataclass(frozen=True)
class SolverConfig:
    """Solver settings.

    ``gains=None`` means ``K = I/dt`` (and ``Kp = K``, ``Ki = 0``), so an
    Euler step is exactly an SQP step. ``merit_coeff`` is ``rho`` for
    equality problems (default 1e3) and ``L`` for inequality problems
    (default: largest ``||lambda||_inf`` seen during the run, plus one).
    """

    method: Method
    scheme: Scheme = Scheme.EULER
    dt: float = 1e-2
    max_steps: int = 1000
    gains: Optional[GainConfig] = None
    beta: float = 0.0
    stop_kkt_tol: float = 0.0
    record_every: int = 1
    merit_coeff: Optional[float] = None
    store_iterates: bool = False

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if not 0 <= self.beta < 1:
            raise ValueError("beta must lie in [0, 1)")
        if self.stop_kkt_tol < 0:
            raise ValueError("stop_kkt_tol must be nonnegative")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")
        if self.method is Method.MOMENTUM_SQP and self.scheme is not Scheme.EULER:
            raise ValueError("momentum-sqp is a discrete scheme; use scheme=euler")

    def resolve_gains(self, m):
        if self.gains is not None:
            if self.gains.K.size != m:
                raise ValueError(f"gains sized for {self.gains.K.size} constraints, problem has {m}")
            return self.gains
        return GainConfig.uniform(m, 1.0 / self.dt)


@dataclass(frozen=True)
class SolverState:
    x: np.ndarray
    z: np.ndarray
    xi: np.ndarray
    x_prev: np.ndarray
    t: float = 0.0
    step: int = 0

    @classmethod
    def initial(cls, problem, x0, z0=None):
        x0 = np.array(x0, dtype=float)
        if x0.shape != (problem.n,):
            raise ValueError(f"x0 has shape {x0.shape}, expected {(problem.n,)}")
        z0 = np.zeros(problem.n) if z0 is None else np.array(z0, dtype=float)
        return cls(x0, z0, np.zeros(problem.m), x0.copy())


def _identity_problem(problem):
    return problem if problem.metric.is_identity else problem.with_metric(MetricSpec.identity())


def rhs(problem, config, state, gains=None):
    """Evaluate the vector field selected by ``config.method`` at ``state``.

    FL-proximal forces ``T = I`` and FL-Newton ``T = (hess f)^{-1}``; both
    pick the equality or inequality field from the constraint kind.
    FL-ineq keeps the problem's own metric. For momentum-SQP the returned
    field is the plain FL-proximal one at ``x`` (used for diagnostics).
    """
    gains = gains if gains is not None else config.resolve_gains(problem.m)
    method = config.method
    if method in (Method.FL_PROXIMAL, Method.FL_NEWTON, Method.MOMENTUM_SQP):
        if method is Method.FL_NEWTON:
            metric = MetricSpec.inverse_hessian(problem.objective.hessian)
        else:
            metric = MetricSpec.identity()
        if method is Method.MOMENTUM_SQP:
            gains = GainConfig.uniform(problem.m, 1.0 / config.dt) if problem.m else gains
        if problem.kind is ConstraintKind.EQUALITY:
            return fl_equality_rhs(problem, gains, state.x, metric)
        return fl_inequality_rhs(problem, gains, state.x, metric)
    if method is Method.FL_INEQUALITY:
        return fl_inequality_rhs(problem, gains, state.x)
    if method is Method.FL_MOMENTUM:
        return fl_momentum_rhs(problem, gains, state.x, state.z)
    mode = "exact" if method is Method.FL_PI_EXACT else "diag"
    return fl_pi_rhs(problem, gains, state.x, state.xi, mode)


def _check_state(x, *others):
    for arr in (x,) + others:
        if not np.all(np.isfinite(arr)):
            raise NonFiniteState("non-finite iterate")
    if np.linalg.norm(x) > DIVERGENCE_NORM:
        raise NonFiniteState(f"iterate norm exceeded {DIVERGENCE_NORM:g}")


def _packed(d, state):
    z_dot = d.z_dot if d.z_dot is not None else np.zeros_like(state.z)
    xi_dot = d.xi_dot if d.xi_dot is not None else np.zeros_like(state.xi)
    return d.x_dot, z_dot, xi_dot


def step(problem, config, state, deriv=None, gains=None):
    """Advance ``state`` by one step of ``config.dt``.

    ``deriv`` may carry the field already evaluated at ``state`` (reused as
    the Euler slope / first RK4 stage).

    Raises
    ------
    NonFiniteState
        If the update is non-finite or its norm exceeds 1e12.
    """
    if config.method is Method.MOMENTUM_SQP:
        return momentum_sqp_step(problem, config, state)
    gains = gains if gains is not None else config.resolve_gains(problem.m)
    dt = config.dt
    d1 = deriv if deriv is not None else rhs(problem, config, state, gains)
    k1 = _packed(d1, state)
    if config.scheme is Scheme.EULER:
        x, z, xi = (s + dt * k for s, k in zip((state.x, state.z, state.xi), k1))
    else:
        def stage(k, a):
            trial = replace(state, x=state.x + a * k[0], z=state.z + a * k[1],
                            xi=state.xi + a * k[2])
            return _packed(rhs(problem, config, trial, gains), trial)

        k2 = stage(k1, 0.5 * dt)
        k3 = stage(k2, 0.5 * dt)
        k4 = stage(k3, dt)
        x, z, xi = (s + dt / 6.0 * (a + 2.0 * b + 2.0 * c + e)
                    for s, a, b, c, e in zip((state.x, state.z, state.xi), k1, k2, k3, k4))
    _check_state(x, z, xi)
    return SolverState(x, z, xi, state.x, state.t + dt, state.step + 1)


def momentum_sqp_step(problem, config, state):
    """One step of momentum-accelerated SQP for equality constraints.

    ``w = x + beta (x - x_prev)``, then an FL-proximal/SQP step from ``w``
    with ``eta = dt`` and ``K = I/eta``::

        lambda = -(J J^T)^{-1} (J grad f(w) - h(w) / eta)
        x_next = w - eta (grad f(w) + J^T lambda)

    For affine constraints this is projected gradient descent with heavy-ball
    extrapolation.
    """
    if problem.kind is not ConstraintKind.EQUALITY:
        raise ValueError("momentum-sqp needs equality constraints")
    eta, beta = config.dt, config.beta
    w = state.x + beta * (state.x - state.x_prev)
    ev = evaluate(problem, w)
    J, g = ev.jac_h, ev.grad_f
    if ev.h.size:
        G = J @ J.T
        lam = -spd_solve(0.5 * (G + G.T), J @ g - ev.h / eta)
        x_next = w - eta * (g + J.T @ lam)
    else:
        x_next = w - eta * g
    _check_state(x_next)
    return SolverState(x_next, state.z, state.xi, state.x.copy(),
                       state.t + eta, state.step + 1)


@dataclass
class TrajectoryTrace:
    """Recorded diagnostics of one run plus a summary."""

    columns: dict
    kind: ConstraintKind
    merit_coeff: float
    stop_reason: str
    steps_taken: int
    final_kkt_gap: float
    best_kkt_gap: float
    best_step: int
    wall_time_ms: float
    x_final: np.ndarray
    x_best: np.ndarray
    lambda_max_seen: float
    states: list = field(default_factory=list)
    multipliers: list = field(default_factory=list)

    def __len__(self):
        return len(self.columns["step"])

    def __getitem__(self, name):
        return self.columns[name]

    def rows(self):
        for i in range(len(self)):
            yield tuple(self.columns[c][i] for c in TRACE_COLUMNS)

    def to_csv(self, fh=None, extra=None):
        """Write the trace as CSV (17 significant digits).

        ``extra`` is an optional ``(name, value)`` pair prepended to every
        row. Returns the text when ``fh`` is None.
        """
        own = fh is None
        fh = io.StringIO() if own else fh
        writer = csv.writer(fh, lineterminator="\n")
        header = list(TRACE_COLUMNS)
        if extra:
            header.insert(0, extra[0])
        writer.writerow(header)
        for row in self.rows():
            cells = [str(int(row[0]))] + [format(float(v), ".17g") for v in row[1:]]
            if extra:
                cells.insert(0, extra[1])
            writer.writerow(cells)
        return fh.getvalue() if own else None

    def summary(self):
        return {
            "steps_taken": self.steps_taken,
            "stop_reason": self.stop_reason,
            "final_kkt_gap": self.final_kkt_gap,
            "best_kkt_gap": self.best_kkt_gap,
            "best_step": self.best_step,
            "wall_time_ms": self.wall_time_ms,
        }


def run(problem, config, x0, z0=None):
    """Integrate from ``x0`` until convergence, ``max_steps`` or failure.

    Every step evaluates the field once at the current state; its multiplier
    gives the KKT gap (equality or inequality form by constraint kind) that
    drives the stopping test ``best gap <= stop_kkt_tol``. A row is recorded
    every ``record_every`` steps and at termination.

    Errors never propagate: they become the stop reasons ``Diverged``
    (non-finite or exploding iterate) or ``Error(<kind>)``.
    """
    start = time.perf_counter()
    kind = problem.kind
    gains = config.resolve_gains(problem.m)
    state = SolverState.initial(problem, x0, z0)
    cols = {c: [] for c in TRACE_COLUMNS}
    penalty = []
    states, mults = [], []
    best_gap, best_step, best_x = np.inf, 0, state.x
    final_gap = np.inf
    lam_max = 0.0
    stop = None
    last_recorded = -1

    def record(d, gap):
        nonlocal last_recorded
        h = d.record.h
        if kind is ConstraintKind.EQUALITY:
            viol = float(np.max(np.abs(h), initial=0.0))
            penalty.append(float(np.sum(np.abs(h))))
        else:
            viol = float(np.max(np.maximum(h, 0.0), initial=0.0))
            penalty.append(float(np.sum(np.maximum(h, 0.0))))
        cols["step"].append(state.step)
        cols["t"].append(state.t)
        cols["f"].append(d.record.f)
        cols["kkt_gap"].append(gap)
        cols["max_violation"].append(viol)
        cols["lambda_inf_norm"].append(d.multiplier.lambda_inf_norm)
        if config.store_iterates:
            states.append(state)
            mults.append(d.multiplier.lam.copy())
        last_recorded = state.step

    while True:
        try:
            d = rhs(problem, config, state, gains)
        except NonFiniteEvaluation:
            stop = "Diverged"
            break
        except FLError as exc:
            stop = f"Error({exc.kind})"
            break
        gap = kkt_gap(d.record, d.multiplier.lam, kind).gap
        final_gap = gap
        lam_max = max(lam_max, d.multiplier.lambda_inf_norm)
        if gap < best_gap:
            best_gap, best_step, best_x = gap, state.step, state.x
        if state.step % config.record_every == 0:
            record(d, gap)
        if best_gap <= config.stop_kkt_tol:
            stop = "Converged"
        elif state.step >= config.max_steps:
            stop = "MaxSteps"
        if stop is not None:
            if last_recorded != state.step:
                record(d, gap)
            break
        try:
            state = step(problem, config, state, d, gains)
        except (NonFiniteState, NonFiniteEvaluation):
            stop = "Diverged"
            break
        except FLError as exc:
            stop = f"Error({exc.kind})"
            break

    if config.merit_coeff is not None:
        coeff = float(config.merit_coeff)
    elif kind is ConstraintKind.EQUALITY:
        coeff = DEFAULT_RHO
    else:
        coeff = lam_max + 1.0
    columns = {c: np.asarray(v, dtype=float) for c, v in cols.items()}
    columns["step"] = np.asarray(cols["step"], dtype=int)
    columns["merit"] = columns["f"] + coeff * np.asarray(penalty, dtype=float)
    return TrajectoryTrace(
        columns=columns,
        kind=kind,
        merit_coeff=coeff,
        stop_reason=stop,
        steps_taken=state.step,
        final_kkt_gap=float(final_gap),
        best_kkt_gap=float(best_gap),
        best_step=int(best_step),
        wall_time_ms=1e3 * (time.perf_counter() - start),
        x_final=state.x,
        x_best=best_x,
        lambda_max_seen=lam_max,
        states=states,
        multipliers=mults,
    )
