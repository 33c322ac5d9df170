"""One explicit Euler step of the FL flow is one SQP step.

With gain K = I/dt the discretized flow solves exactly the proximal SQP
subproblem. We check this on a random QP against the block-KKT reference
solver, for the Euclidean metric and for the Newton metric T = Q^{-1}.
"""

import numpy as np

from flopt import (
    DeterministicRng,
    Method,
    MetricSpec,
    SolverConfig,
    SolverState,
    random_qp,
    sqp_equality_oracle,
    step,
)

eta = 0.1
p = random_qp(12, 4, "eq", seed=3)
x = DeterministicRng(3).normal_array(p.n)

for method, problem in [
    (Method.FL_PROXIMAL, p),
    (Method.FL_NEWTON, p.with_metric(MetricSpec.inverse_hessian(p.objective.hessian))),
]:
    fl = step(problem, SolverConfig(method, dt=eta), SolverState.initial(problem, x)).x
    sqp = sqp_equality_oracle(problem, x, eta)
    print(f"{method.value:12s} |FL step - SQP step| = {np.linalg.norm(fl - sqp):.2e}")

# the constraint residual of the new point is (1 - K dt) h = 0: one step lands
# on the linearization, and for affine constraints on the feasible set itself
print("max |h| after one step:", np.abs(p.constraints.value(fl)).max())
