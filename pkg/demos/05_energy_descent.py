"""Energy functional: descent along the flow and equilibria as its
critical points.

The local potential theta is tabulated from the inverse of the response,
its global minimizer located, and the energy

    F(u) = int [theta(u) - theta(mbar)] + 1/4 intint J [f(u)-f(u')]^2

evaluated along a trajectory.  F decreases monotonically with rate equal
to minus the dissipation integral; the damped fixed-point solver then
lands on an equilibrium where the dissipation vanishes, and Newton-Krylov
polishes it to machine precision.
"""

import numpy as np

from nonlocal_field import (
    Field,
    KernelSpec,
    Model,
    build_grid,
    build_kernel,
    build_potential_table,
    descent_check,
    integrate,
    make_identity,
    make_tanh,
    refine_newton,
    solve_equilibrium_fixed_point,
)

grid = build_grid(1, [0.0, 1.0], 65)
kernel = build_kernel(KernelSpec.uniform(), grid)
model = Model(grid=grid, kernel=kernel, f=make_identity(), g=make_tanh(),
              beta=2.0, h=0.0)

table = build_potential_table(model.f, model.g, model.beta, model.h)
print(f"global minimizer of the potential: mbar = {table.mbar:.12f}")
print(f"theta(mbar) = {table.theta_mbar:.12f}")

rng = np.random.default_rng(12)
u0 = Field(grid, 0.8 * rng.uniform(-1.0, 1.0, grid.n_nodes))
trajectory = integrate(model, u0, t_end=3.0, dt=0.01)
report = descent_check(model, table, trajectory)

print("\ntime    F(u)          I(u)")
for k in range(0, trajectory.n_times, 30):
    print(f"{trajectory.times[k]:5.1f}   {report.energies[k]:.9f}   "
          f"{report.dissipations[k]:.3e}")
print(f"\nworst per-step energy increase: {report.monotone_slack:+.2e}")
print(f"worst defect of dF/dt = -I:     {report.identity_residual:.2e} "
      f"(first order in dt)")

solved = solve_equilibrium_fixed_point(model, u0, tol=1e-10, table=table)
polished = refine_newton(model, solved.state, tol=1e-13, table=table)
print(f"\nfixed-point solve: residual {solved.residual:.2e} in "
      f"{solved.iterations} iterations")
print(f"Newton-Krylov polish: residual {polished.residual:.2e} in "
      f"{polished.iterations} steps")
print(f"dissipation at the equilibrium: {polished.dissipation:.2e}")
print(f"energy at the equilibrium:      {polished.lyapunov:.2e}")
