"""Kernel norms and the three operator-norm inequalities on random fields.

For each kernel family the discrete norms ||J||_r are computed on the
grid, then the pointwise Hoelder bound, the L^p contraction bound and the
L^1 smoothing bound are checked on seeded random fields.  Because every
norm shares one quadrature, the inequalities hold to roundoff, not just
asymptotically.
"""

import math

import numpy as np

from nonlocal_field import (
    Field,
    KernelSpec,
    build_grid,
    build_kernel,
    kernel_norm,
    verify_boundK,
)

grid = build_grid(1, [0.0, 1.0], 129)
specs = {
    "uniform": KernelSpec.uniform(),
    "gaussian(0.15)": KernelSpec.gaussian(0.15),
    "tophat(0.23)": KernelSpec.tophat(0.23),
}

print(f"{'kernel':>15} {'||J||_1':>10} {'||J||_2':>10} {'||J||_inf':>10} "
      f"{'max tail':>10}")
kernels = {}
for name, spec in specs.items():
    kernels[name] = build_kernel(spec, grid)
    k = kernels[name]
    print(f"{name:>15} {kernel_norm(k, 1):10.6f} {kernel_norm(k, 2):10.6f} "
          f"{kernel_norm(k, math.inf):10.4f} {k.tail_mass.max():10.3e}")

rng = np.random.default_rng(7)
print("\nworst slack (right side minus left side) over 200 random fields:")
for name, kernel in kernels.items():
    worst = math.inf
    for _ in range(200):
        u = Field(grid, rng.standard_normal(grid.n_nodes))
        for p in (1.0, 2.0, math.inf):
            worst = min(worst, verify_boundK(kernel, u, p).min_slack)
    print(f"{name:>15}: {worst:+.3e}   (negative would be a violation)")
