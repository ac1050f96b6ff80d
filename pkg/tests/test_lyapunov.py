import math

import numpy as np
import pytest

from nonlocal_field import (
    Field,
    Model,
    build_grid,
    build_kernel,
    build_potential_table,
    descent_check,
    dissipation_I,
    dissipation_integrand,
    integrate,
    KernelSpec,
    lyapunov_F,
    make_identity,
    make_tanh,
    potential_theta,
    refine_newton,
    rhs,
    solve_equilibrium_fixed_point,
)
from nonlocal_field.errors import (
    NoInteriorMinimumError,
    NonConvergenceError,
    PotentialDomainError,
)

# frozen roots of m = tanh(beta (m + h)) from the bisection oracle
ROOTS = {
    (2.0, 0.0): 0.9575040240772688,
    (0.5, 0.0): 0.0,
    (0.5, 0.1): 0.09934249936317718,
    (2.0, 0.1): 0.9730156866523543,
}


def theta_closed_form(m, beta, h):
    """Antiderivative oracle for f = identity, g = tanh:
    theta(m) = -m^2/2 - h m + (m atanh m + ln(1 - m^2)/2) / beta."""
    return (-0.5 * m * m - h * m
            + (m * math.atanh(m) + 0.5 * math.log1p(-m * m)) / beta)


@pytest.fixture(scope="module")
def table_beta2():
    return build_potential_table(make_identity(), make_tanh(), 2.0, 0.0)


@pytest.fixture(scope="module")
def model_beta2(table_beta2):
    grid = build_grid(1, [0.0, 1.0], 65)
    kernel = build_kernel(KernelSpec.uniform(), grid)
    return Model(grid=grid, kernel=kernel, f=table_beta2.f, g=table_beta2.g,
                 beta=2.0, h=0.0)


def test_theta_zero_at_origin():
    val = potential_theta(make_identity(), make_tanh(), 2.0, 0.0, 1.0, 0.0)
    assert val == pytest.approx(0.0, abs=1e-14)


@pytest.mark.parametrize("beta,h", [(2.0, 0.0), (0.5, 0.0), (2.0, 0.1)])
def test_theta_matches_closed_form(beta, h):
    f, g = make_identity(), make_tanh()
    for m in np.linspace(-0.99, 0.99, 100):
        quad_val = potential_theta(f, g, beta, h, 1.0, float(m))
        assert quad_val == pytest.approx(theta_closed_form(m, beta, h),
                                         abs=1e-10)


def test_theta_rejects_saturation_margin():
    with pytest.raises(PotentialDomainError):
        potential_theta(make_identity(), make_tanh(), 2.0, 0.0, 1.0, 0.9999999)


def test_theta_stationarity_at_scalar_root():
    # d theta / dm vanishes exactly at the fixed points of m = tanh(beta(m+h))
    f, g = make_identity(), make_tanh()
    for (beta, h), root in ROOTS.items():
        if root == 0.0:
            continue
        eps = 1e-6
        d = (potential_theta(f, g, beta, h, 1.0, root + eps)
             - potential_theta(f, g, beta, h, 1.0, root - eps)) / (2 * eps)
        assert abs(d) <= 1e-8


def test_table_matches_adaptive_quadrature(table_beta2):
    for m in np.linspace(-0.97, 0.97, 23):
        assert table_beta2.theta_at(m)[0] == pytest.approx(
            potential_theta(table_beta2.f, table_beta2.g, 2.0, 0.0, 1.0,
                            float(m)),
            abs=1e-12)


def test_table_i_zero_at_f_zero(table_beta2):
    assert table_beta2.i_at(0.0)[0] == pytest.approx(0.0, abs=1e-14)


def test_find_mbar_single_well():
    table = build_potential_table(make_identity(), make_tanh(), 0.5, 0.0)
    assert abs(table.mbar) <= 1e-8
    assert table.theta_mbar == pytest.approx(0.0, abs=1e-12)


def test_find_mbar_double_well(table_beta2):
    # symmetric pair +-m*; tie-break picks the nonnegative representative
    assert table_beta2.mbar == pytest.approx(ROOTS[(2.0, 0.0)], abs=1e-8)
    assert table_beta2.mbar >= 0.0


def test_find_mbar_field_breaks_symmetry():
    table = build_potential_table(make_identity(), make_tanh(), 2.0, 0.1)
    root = ROOTS[(2.0, 0.1)]
    assert table.mbar == pytest.approx(root, abs=1e-8)
    # the positive well is strictly deeper than the negative one
    neg = table.theta_at(-root)[0]
    assert table.theta_mbar < neg - 1e-3


def test_find_mbar_no_interior_minimum():
    # f = g = identity on a table forced over [-1, 1]: theta = -m^2/2 - i/beta
    # with i = -m^2/2, so theta = -m^2/2 + m^2/(2 beta); beta=2 makes theta
    # concave with maxima inside and minima at the edges
    with pytest.raises(NoInteriorMinimumError):
        build_potential_table(make_identity(), make_identity(), 2.0, 0.0,
                              rho=1.0)


def test_lyapunov_zero_at_mbar(model_beta2, table_beta2):
    grid = model_beta2.grid
    u = Field(grid, np.full(65, table_beta2.mbar))
    assert lyapunov_F(model_beta2, table_beta2, u) == pytest.approx(0.0,
                                                                    abs=1e-12)


def test_lyapunov_constant_states(model_beta2, table_beta2):
    # interaction term vanishes for constants: F = |Omega| (theta(m)-theta(mbar))
    grid = model_beta2.grid
    for m in (-0.5, 0.0, 0.4, 0.9):
        u = Field(grid, np.full(65, m))
        expected = grid.measure * (theta_closed_form(m, 2.0, 0.0)
                                   - theta_closed_form(table_beta2.mbar, 2.0, 0.0))
        assert lyapunov_F(model_beta2, table_beta2, u) == pytest.approx(
            expected, abs=1e-10)


def test_lyapunov_matches_double_loop_oracle(model_beta2, table_beta2):
    # independent oracle: closed-form theta plus explicit double quadrature
    grid = model_beta2.grid
    rng = np.random.default_rng(71)
    w = grid.weights
    J = model_beta2.kernel.matrix
    for _ in range(5):
        u = rng.uniform(-0.9, 0.9, 65)
        val = lyapunov_F(model_beta2, table_beta2, Field(grid, u))

        local = sum(
            w[i] * (theta_closed_form(u[i], 2.0, 0.0)
                    - theta_closed_form(table_beta2.mbar, 2.0, 0.0))
            for i in range(65))
        inter = 0.0
        for i in range(65):
            for j in range(65):
                inter += w[i] * w[j] * J[i, j] * (u[i] - u[j]) ** 2
        oracle = local + 0.25 * inter
        assert val == pytest.approx(oracle, abs=1e-12)
        assert val >= -1e-12


def test_lyapunov_rejects_inadmissible_state(model_beta2, table_beta2):
    u = Field(model_beta2.grid, np.full(65, 0.99999999))
    with pytest.raises(PotentialDomainError):
        lyapunov_F(model_beta2, table_beta2, u)


def test_lyapunov_positive_away_from_mbar(model_beta2, table_beta2):
    rng = np.random.default_rng(73)
    for _ in range(10):
        u = rng.uniform(-0.9, 0.9, 65)
        if np.abs(u - table_beta2.mbar).max() > 1e-3:
            assert lyapunov_F(model_beta2, table_beta2,
                              Field(model_beta2.grid, u)) > 1e-10


def test_dissipation_zero_at_equilibrium(model_beta2):
    result = solve_equilibrium_fixed_point(
        model_beta2, Field(model_beta2.grid, np.full(65, 0.1)), tol=1e-13)
    assert result.dissipation is not None
    assert result.dissipation <= 1e-10
    assert abs(result.dissipation) <= 1e-10


def test_dissipation_zero_at_mbar_constant(model_beta2, table_beta2):
    u = Field(model_beta2.grid, np.full(65, table_beta2.mbar))
    assert dissipation_I(model_beta2, u) == pytest.approx(0.0, abs=1e-10)


def test_dissipation_positive_off_equilibrium(model_beta2):
    rng = np.random.default_rng(79)
    for _ in range(20):
        u = Field(model_beta2.grid, rng.uniform(-0.9, 0.9, 65))
        assert dissipation_I(model_beta2, u) > 0.0


def test_dissipation_integrand_pointwise_nonnegative(model_beta2):
    rng = np.random.default_rng(83)
    for _ in range(20):
        u = Field(model_beta2.grid, rng.uniform(-0.95, 0.95, 65))
        assert dissipation_integrand(model_beta2, u).min() >= -1e-12


def test_descent_stationary_at_equilibrium(model_beta2, table_beta2):
    grid = model_beta2.grid
    u0 = Field(grid, np.full(65, ROOTS[(2.0, 0.0)]))
    traj = integrate(model_beta2, u0, 0.5, 0.01)
    report = descent_check(model_beta2, table_beta2, traj)
    assert report.monotone(1e-12)
    assert np.abs(np.diff(report.energies)).max() <= 1e-12
    assert np.abs(report.dissipations).max() <= 1e-10


def test_descent_strictly_decreasing(model_beta2, table_beta2):
    rng = np.random.default_rng(89)
    u0 = Field(model_beta2.grid, rng.uniform(-0.5, 0.5, 65))
    traj = integrate(model_beta2, u0, 2.0, 0.01)
    report = descent_check(model_beta2, table_beta2, traj)
    assert report.monotone(1e-8)
    res = np.abs(rhs(model_beta2, traj.state(k := 0)).values).max()
    # while far from equilibrium the decrease is strict
    deltas = np.diff(report.energies)
    residuals = [np.abs(rhs(model_beta2, traj.state(k)).values).max()
                 for k in range(traj.n_times - 1)]
    for d, r in zip(deltas, residuals):
        if r > 1e-8:
            assert d < 0.0


def test_descent_identity_residual_halves(model_beta2, table_beta2):
    rng = np.random.default_rng(97)
    u0 = Field(model_beta2.grid, rng.uniform(-0.9, 0.9, 65))
    coarse = descent_check(model_beta2, table_beta2,
                           integrate(model_beta2, u0, 1.0, 0.01))
    fine = descent_check(model_beta2, table_beta2,
                         integrate(model_beta2, u0, 1.0, 0.005))
    ratio = coarse.identity_residual / fine.identity_residual
    assert 1.5 <= ratio <= 2.5


def test_fixed_point_solver_immediate_at_mbar(model_beta2, table_beta2):
    u0 = Field(model_beta2.grid, np.full(65, table_beta2.mbar))
    result = solve_equilibrium_fixed_point(model_beta2, u0, tol=1e-10,
                                           table=table_beta2)
    assert result.iterations <= 2
    assert result.lyapunov is not None and result.lyapunov <= 1e-10


@pytest.mark.parametrize("beta,h", list(ROOTS))
def test_fixed_point_solver_matches_scalar_roots(beta, h):
    grid = build_grid(1, [0.0, 1.0], 65)
    kernel = build_kernel(KernelSpec.uniform(), grid)
    model = Model(grid=grid, kernel=kernel, f=make_identity(), g=make_tanh(),
                  beta=beta, h=h)
    result = solve_equilibrium_fixed_point(
        model, Field(grid, np.full(65, 0.1)), tol=1e-13, max_iter=2000)
    assert result.residual <= 1e-13
    assert np.ptp(result.state.values) <= 1e-12
    assert np.abs(result.state.values - ROOTS[(beta, h)]).max() <= 1e-10


def test_fixed_point_solver_nonconvergence_error(model_beta2):
    with pytest.raises(NonConvergenceError) as err:
        solve_equilibrium_fixed_point(
            model_beta2, Field(model_beta2.grid, np.full(65, 0.1)),
            tol=1e-13, max_iter=2)
    assert err.value.residual is not None


def test_newton_zero_correction_at_equilibrium(model_beta2):
    u = Field(model_beta2.grid, np.full(65, ROOTS[(2.0, 0.0)]))
    result = refine_newton(model_beta2, u, tol=1e-10)
    assert result.iterations == 0
    assert np.array_equal(result.state.values, u.values)


def test_newton_linear_model_one_step():
    grid = build_grid(1, [0.0, 1.0], 33)
    kernel = build_kernel(KernelSpec.uniform(), grid)
    model = Model(grid=grid, kernel=kernel, f=make_identity(),
                  g=make_identity(), beta=1.0, h=0.0)
    rng = np.random.default_rng(101)
    u = Field(grid, 0.02 * rng.standard_normal(33))
    result = refine_newton(model, u, tol=1e-12)
    assert result.residual <= 1e-12
    assert result.iterations <= 2


def test_newton_quadratic_convergence(model_beta2):
    rng = np.random.default_rng(103)
    u = Field(model_beta2.grid,
              ROOTS[(2.0, 0.0)] + 0.03 * rng.standard_normal(65))
    start_res = np.abs(rhs(model_beta2, u).values).max()
    assert start_res < 0.1
    result = refine_newton(model_beta2, u, tol=1e-13)
    assert result.residual <= 1e-13
    hist = result.residual_history
    assert len(hist) <= 5
    # superlinear contraction: each step squares the residual scale
    for a, b in zip(hist[:-1], hist[1:]):
        if a < 1e-2 and b > 1e-15:
            assert b <= 10.0 * a * a


def test_newton_requires_near_equilibrium(model_beta2):
    u = Field(model_beta2.grid, np.full(65, -0.8))
    with pytest.raises(ValueError):
        refine_newton(model_beta2, u)


def test_critical_point_equivalence_both_directions(model_beta2):
    # residual <= 1e-10 => I <= 1e-8; and I <= 1e-12 => residual <= 1e-6
    result = solve_equilibrium_fixed_point(
        model_beta2, Field(model_beta2.grid, np.full(65, 0.1)), tol=1e-12)
    assert result.residual <= 1e-10
    assert result.dissipation <= 1e-8

    rng = np.random.default_rng(107)
    eq = result.state.values
    for scale in (1e-7, 3e-7, 1e-6):
        u = Field(model_beta2.grid, eq + scale * rng.uniform(-1, 1, 65))
        diss = dissipation_I(model_beta2, u)
        if diss <= 1e-12:
            res = np.abs(rhs(model_beta2, u).values).max()
            assert res <= 1e-6
