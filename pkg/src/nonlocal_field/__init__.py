"""Simulation and verification toolkit for nonlocal evolution equations.

The model is  du/dt = -u + g(beta * K(f(u)) + beta * h)  on a bounded box
with the state held at zero outside, K an integral operator with a
symmetric mass-one kernel.  Alongside the simulator the toolkit carries
machinery to check the analytic guarantees of that flow numerically:
operator-norm bounds, the absorbing ball and its decay rate, sup-norm
confinement, order preservation against sub/supersolutions, and descent
of the energy functional down to equilibria.
"""

from .bounds import (
    AbsorbingVerdict,
    BoundsReport,
    GFixedPointResult,
    GrowthConstants,
    OrderingVerdict,
    ScalarTrajectory,
    SpaceTimeField,
    absorbing_radius,
    check_absorbing,
    compute_bounds,
    g_fixed_point,
    g_operator_apply,
    linfty_rho,
    scalar_envelope,
    verify_ordering,
)
from .dynamics import (
    Model,
    Trajectory,
    integrate,
    jacobian_vector,
    map_F,
    rhs,
    step_etd1,
    step_rk4,
)
from .grid import (
    DomainGrid,
    Field,
    build_grid,
    conjugate_exponent,
    integrate_field,
    lp_norm,
)
from .kernels import (
    BoundKReport,
    Kernel,
    KernelSpec,
    apply_K,
    build_kernel,
    kernel_norm,
    load_kernel_csv,
    save_kernel_csv,
    verify_boundK,
)
from .lyapunov import (
    DescentReport,
    EquilibriumResult,
    PotentialTable,
    build_potential_table,
    descent_check,
    dissipation_I,
    dissipation_integrand,
    find_mbar,
    lyapunov_F,
    potential_theta,
    refine_newton,
    solve_equilibrium_fixed_point,
)
from .nonlinearity import (
    GrowthReport,
    Nonlinearity,
    available_families,
    check_growth,
    get_nonlinearity,
    lipschitz_on_interval,
    make_identity,
    make_linear,
    make_ramp,
    make_scaled_tanh,
    make_tanh,
    numeric_inverse,
)
from .scenario import Scenario, build_initial_field, build_model, emit_scenario, parse_scenario

__version__ = "0.1.0"
