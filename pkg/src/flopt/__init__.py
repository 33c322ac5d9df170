"""Constrained optimization by feedback linearization.

The multiplier of a constrained gradient flow is treated as a control
input chosen so that the constraint values obey ``dh/dt = -K h``. The
package provides the resulting vector fields (equality, inequality,
Newton-metric, momentum and PI variants), fixed-step integrators,
KKT/merit diagnostics, independent SQP reference solvers and seeded test
problems.
"""

from .diagnostics import (
    KktReport,
    affine_momentum_constants,
    kkt_gap,
    lambda_bar,
    merit_equality,
    merit_inequality,
    momentum_merit,
)
from .dynamics import (
    Derivative,
    GainConfig,
    approx_inverse_diag,
    fl_equality_rhs,
    fl_inequality_rhs,
    fl_momentum_rhs,
    fl_pi_rhs,
)
from .errors import *  # noqa: F401,F403
from .integrate import (
    Method,
    Scheme,
    SolverConfig,
    SolverState,
    TrajectoryTrace,
    momentum_sqp_step,
    run,
    step,
)
from .kernel import DeterministicRng, finite_diff_jacobian, gram, spd_solve
from .multiplier import (
    MultiplierSolution,
    equality_multiplier,
    nnqp_brute_force,
    nnqp_kkt_residual,
    nnqp_solve,
)
from .oracles import (
    exponential_decay_reference,
    momentum_projected_gradient_oracle,
    sqp_equality_oracle,
    sqp_inequality_oracle,
    strongly_convex_rate_reference,
)
from .problem import (
    ConstraintKind,
    ConstraintSpec,
    EvalRecord,
    MetricSpec,
    ObjectiveSpec,
    ProblemInstance,
    evaluate,
    metric_apply,
    validate_derivatives,
)
from .suite import (
    affine_equality_quadratic,
    constrained_logistic,
    quadratic_problem,
    random_qp,
    sphere_equality,
)

__version__ = "0.1.0"
