"""Absorbing ball: start far outside and watch the predicted decay rate.

With |g| <= 1 the declared growth constants are (k1, k2) = (0, 1), so the
L^2 ball of radius R = (1+sigma)|Omega|^(1/2) absorbs the flow and outside
it the squared norm decays at least at rate sigma*p/(1+sigma) on the log
scale.  The run starts at 5R and reports the measured log-slope.
"""

import numpy as np

from nonlocal_field import (
    Field,
    GrowthConstants,
    KernelSpec,
    Model,
    build_grid,
    build_kernel,
    check_absorbing,
    compute_bounds,
    integrate,
    make_identity,
    make_tanh,
)

grid = build_grid(1, [0.0, 1.0], 65)
kernel = build_kernel(KernelSpec.uniform(), grid)
model = Model(grid=grid, kernel=kernel, f=make_identity(), g=make_tanh(),
              beta=2.0, h=0.0)

consts = GrowthConstants(k1=0.0, k2=1.0, c1=1.0, c2=0.0)
report = compute_bounds(model, consts, p=2.0, sigma=1.0)
print(f"contraction margin eps = {report.epsilon}")
print(f"absorbing radius    R  = {report.R}")
print(f"decay rate (log of |u|_2^2) = {report.decay_rate}")
print(f"sup-norm bound      rho = {report.rho}")

rng = np.random.default_rng(4)
raw = rng.uniform(-1.0, 1.0, grid.n_nodes)
raw *= 5.0 * report.R / grid.norm(raw, 2)
trajectory = integrate(model, Field(grid, raw), t_end=10.0, dt=0.01)

verdict = check_absorbing(trajectory, report)
print(f"\nstart |u0|_2 = {trajectory.records['L2'][0]:.3f} = 5R")
print(f"entered ball at t = {verdict.first_entry_time:.2f}")
print(f"max measured log-slope outside: {verdict.max_slope_outside:.3f} "
      f"(must stay below {verdict.required_slope:.3f})")
print(f"max |u|_2 after entry: {verdict.max_norm_after_entry:.6f} <= "
      f"R (1 + 1e-6)")
print(f"verdict: {'pass' if verdict.passed else 'fail'}")
