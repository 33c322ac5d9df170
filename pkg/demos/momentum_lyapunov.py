"""A Lyapunov function for the damped second-order FL flow.

On a quadratic with affine constraints every constant in the decrease
condition is explicit, so the damping threshold can be computed. With
alpha at that threshold the merit l(x, z) must fall monotonically along
the trajectory; the script prints it every 500 steps.

The threshold is conservative. At that much damping the velocity tracks
force / alpha, so the constraint residual shrinks at roughly K / alpha
instead of K.
"""

import numpy as np

from flopt import (
    DeterministicRng,
    GainConfig,
    Method,
    Scheme,
    SolverConfig,
    affine_equality_quadratic,
    affine_momentum_constants,
    momentum_merit,
    run,
)

p = affine_equality_quadratic(10, 3, seed=0)
K = np.ones(p.m)
const = affine_momentum_constants(p.info["Q"], p.info["A"], K)
alpha = const["alpha_min"]
print({k: round(float(v), 3) for k, v in const.items()})

cfg = SolverConfig(Method.FL_MOMENTUM, Scheme.RK4, 1e-3, 5000, GainConfig(K, alpha=alpha),
                   record_every=500, store_iterates=True)
trace = run(p, cfg, DeterministicRng(1).normal_array(p.n))
for s in trace.states:
    ell = momentum_merit(p, s.x, s.z, const["a1"], const["a2"], alpha)
    print(f"t = {s.t:4.1f}  l = {ell:12.4f}  |h| = {np.abs(p.constraints.value(s.x)).max():.1e}")
