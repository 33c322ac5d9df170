"""An integral term rescues the flow when (J J^T)^{-1} is approximated.

Replacing (J J^T)^{-1} with the inverse of its diagonal leaves a constant
bias in the constraint dynamics, so plain FL settles away from the
feasible set. Adding an integral state xi' = h removes the bias.

The instance is a random QP whose optimal active set is imposed as
equality constraints. Its Gram matrix is far from diagonal.
"""

import numpy as np

from flopt import GainConfig, Method, SolverConfig, nnqp_solve, quadratic_problem, random_qp, run

q = random_qp(20, 10, "ineq", seed=13)
Q, c, A, b = (q.info[k] for k in "QcAb")
QiAt = np.linalg.solve(Q, A.T)
active = np.flatnonzero(nnqp_solve(A @ QiAt, QiAt.T @ c - b).lam > 1e-10)
p = quadratic_problem(Q, c, A[active], b[active], "eq")
J = p.info["A"]
print("J J^T =\n", np.round(J @ J.T, 3))

for label, ki in (("P only", 0.0), ("PI", 1.0)):
    gains = GainConfig.uniform(p.m, 1.0, kp=1.0, ki=ki)
    cfg = SolverConfig(Method.FL_PI_DIAG, dt=0.01, max_steps=5000, gains=gains,
                       record_every=500)
    trace = run(p, cfg, np.zeros(p.n))
    print(f"{label:7s}", " ".join(f"{g:8.1e}" for g in trace["kkt_gap"]))
