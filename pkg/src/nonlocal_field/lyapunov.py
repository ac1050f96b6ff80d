"""Energy functional, dissipation rate and equilibrium solvers.

The local potential is

    theta(m) = -f(m)^2 / 2 - h f(m) - i(m) / beta,
    i(m)     = -int_{s0}^{m} g^{-1}(s) f'(s) ds,   s0 = f^{-1}(0),

(the inner integral written after substituting s = f(sigma), so only the
inverse of g is ever computed).  The energy of a state combines the
potential gap to its global minimum with a kernel-weighted interaction
term; along trajectories the energy decays with rate equal to minus the
dissipation integral, whose integrand is pointwise nonnegative for
increasing f and g.  Evaluations reject states within a small margin of
the saturation level, where g^{-1} blows up, rather than clamping them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq
from scipy.sparse.linalg import LinearOperator, gmres

from .dynamics import (
    Model,
    Trajectory,
    jacobian_vector_values,
    map_F_values,
    rhs_values,
)
from .errors import (
    NoInteriorMinimumError,
    NonConvergenceError,
    OutOfRangeError,
    PotentialDomainError,
    RefineFailureError,
)
from .grid import Field
from .kernels import apply_K_values
from .nonlinearity import Nonlinearity, numeric_inverse

MARGIN_FRACTION = 1e-6
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


def _inverse_integrand(g: Nonlinearity, f: Nonlinearity, pts: np.ndarray,
                       ) -> np.ndarray:
    return g.invert_array(pts) * f.deriv(pts)


def _panel_integrals(g: Nonlinearity, f: Nonlinearity, a: np.ndarray,
                     b: np.ndarray) -> np.ndarray:
    """Gauss-Legendre integrals of g^{-1} f' over the panels [a_k, b_k]."""
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    pts = mid[None, :] + half[None, :] * _GL_NODES[:, None]
    vals = _inverse_integrand(g, f, pts.ravel()).reshape(pts.shape)
    return half * (_GL_WEIGHTS @ vals)


@dataclass(eq=False)
class PotentialTable:
    """theta and i on a dense admissible grid, plus the global minimizer."""

    f: Nonlinearity
    g: Nonlinearity
    beta: float
    h: float
    rho: float
    margin: float
    m_grid: np.ndarray
    i_values: np.ndarray
    theta_values: np.ndarray
    mbar: float = math.nan
    theta_mbar: float = math.nan
    sigma0: float = 0.0
    _cum: np.ndarray = field(default=None, repr=False)
    _offset: float = field(default=0.0, repr=False)

    def i_at(self, m) -> np.ndarray:
        """i(m) for scalars or arrays inside the admissible interval."""
        m = np.atleast_1d(np.asarray(m, dtype=float))
        lo, hi = self.m_grid[0], self.m_grid[-1]
        if np.any(m < lo) or np.any(m > hi):
            raise PotentialDomainError(
                f"potential evaluated outside [{lo:.9g}, {hi:.9g}] "
                f"(saturation margin {self.margin:.3g})"
            )
        j = np.clip(np.searchsorted(self.m_grid, m, side="right") - 1,
                    0, len(self.m_grid) - 2)
        partial = _panel_integrals(self.g, self.f, self.m_grid[j], m)
        return -(self._cum[j] + partial - self._offset)

    def theta_at(self, m) -> np.ndarray:
        m = np.atleast_1d(np.asarray(m, dtype=float))
        fm = self.f(m)
        return -0.5 * fm * fm - self.h * fm - self.i_at(m) / self.beta

    def theta_scalar(self, m: float) -> float:
        return float(self.theta_at(m)[0])

    def matches(self, model: Model) -> bool:
        return (self.f is model.f and self.g is model.g
                and self.beta == model.beta and self.h == model.h)


def build_potential_table(f: Nonlinearity, g: Nonlinearity, beta: float,
                          h: float, rho: float | None = None,
                          n_grid: int = 10_000) -> PotentialTable:
    """Tabulate theta on [-rho + delta, rho - delta] and locate its global
    minimum.  ``rho`` defaults to the declared saturation bound of g."""
    if beta <= 0:
        raise ValueError("potential needs beta > 0")
    if rho is None:
        rho = g.range_bound
    if rho is None or rho <= 0:
        raise ValueError("need rho > 0 (g declares no saturation bound)")
    delta = MARGIN_FRACTION * rho
    m_grid = np.linspace(-rho + delta, rho - delta, n_grid)

    sigma0 = float(f.invert(0.0))
    if not m_grid[0] <= sigma0 <= m_grid[-1]:
        raise PotentialDomainError(
            f"zero of f at {sigma0:.6g} lies outside the invertibility "
            f"range of g"
        )

    panels = _panel_integrals(g, f, m_grid[:-1], m_grid[1:])
    cum = np.concatenate([[0.0], np.cumsum(panels)])
    # integral of g^{-1} f' from the grid start to the zero of f
    j0 = int(np.clip(np.searchsorted(m_grid, sigma0, side="right") - 1,
                     0, n_grid - 2))
    offset = cum[j0] + float(_panel_integrals(
        g, f, np.array([m_grid[j0]]), np.array([sigma0]))[0])

    i_values = -(cum - offset)
    fm = f(m_grid)
    theta_values = -0.5 * fm * fm - h * fm - i_values / beta

    table = PotentialTable(
        f=f, g=g, beta=beta, h=h, rho=rho, margin=delta,
        m_grid=m_grid, i_values=i_values, theta_values=theta_values,
        sigma0=sigma0, _cum=cum, _offset=offset,
    )
    table.mbar, table.theta_mbar = find_mbar(table)
    return table


def potential_theta(f: Nonlinearity, g: Nonlinearity, beta: float, h: float,
                    rho: float, m: float) -> float:
    """Pointwise theta(m) by adaptive quadrature of g^{-1}(s) f'(s).

    Independent of the tabulated path: uses scipy's adaptive rule and the
    scalar inverse, so it doubles as a cross-check on the table.
    """
    if beta <= 0:
        raise ValueError("potential needs beta > 0")
    delta = MARGIN_FRACTION * rho
    if abs(m) >= rho - delta:
        raise PotentialDomainError(
            f"|m| = {abs(m):.9g} reaches the saturation margin "
            f"rho - delta = {rho - delta:.9g}"
        )
    sigma0 = f.invert(0.0)

    if g.has_inverse:
        def ginv(s: float) -> float:
            return float(g.invert(s))
    else:
        bracket_hint = (-8.0 * rho, 8.0 * rho)

        def ginv(s: float) -> float:
            return numeric_inverse(g, s, bracket_hint)

    integral, _ = quad(lambda s: ginv(s) * float(f.deriv(s)), sigma0, m,
                       epsabs=1e-13, epsrel=1e-12, limit=200)
    i_m = -integral
    fm = float(f(m))
    return -0.5 * fm * fm - h * fm - i_m / beta


def _golden_minimize(fn, lo: float, hi: float, tol: float = 1e-10) -> float:
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fn(c), fn(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fn(d)
    return 0.5 * (a + b)


def find_mbar(table: PotentialTable) -> tuple[float, float]:
    """Global minimizer of theta on the admissible grid.

    Dense-scan candidates are refined by golden section and then polished
    on the stationarity equation g^{-1}(m)/beta = f(m) + h (exact calculus,
    immune to the sqrt-noise floor of comparison-only minimization).  Ties
    are broken by smallest |m|, then by the nonnegative representative.
    """
    theta = table.theta_values
    grid = table.m_grid
    n = len(grid)
    k_min = int(np.argmin(theta))
    if k_min in (0, n - 1):
        raise NoInteriorMinimumError(
            "theta attains its minimum at the admissible-interval edge"
        )

    tie_tol = 1e-10 * (1.0 + abs(float(theta[k_min])))
    candidates = [
        k for k in range(1, n - 1)
        if theta[k] <= theta[k - 1] and theta[k] <= theta[k + 1]
        and theta[k] <= theta[k_min] + tie_tol
    ]

    def stationarity(m: float) -> float:
        return (float(table.g.invert(m)) / table.beta
                - float(table.f(m)) - table.h)

    refined: list[tuple[float, float]] = []
    for k in candidates:
        lo, hi = float(grid[k - 1]), float(grid[k + 1])
        m_hat = _golden_minimize(table.theta_scalar, lo, hi)
        try:
            if stationarity(lo) < 0.0 < stationarity(hi):
                m_hat = float(brentq(stationarity, lo, hi,
                                     xtol=1e-14, rtol=8.9e-16))
        except (ValueError, OutOfRangeError):
            pass
        refined.append((m_hat, table.theta_scalar(m_hat)))

    theta_best = min(t for _, t in refined)
    best = [(m, t) for m, t in refined if t <= theta_best + tie_tol]
    abs_best = min(abs(m) for m, _ in best)
    best = [(m, t) for m, t in best if abs(m) <= abs_best + 1e-12]
    mbar, theta_mbar = max(best, key=lambda mt: mt[0])
    return float(mbar), float(theta_mbar)


# ---------------------------------------------------------------------------
# Energy functional and dissipation along the flow


def _require_admissible(table: PotentialTable, values: np.ndarray) -> None:
    peak = float(np.max(np.abs(values)))
    if peak >= table.m_grid[-1]:
        raise PotentialDomainError(
            f"state reaches {peak:.9g}, at or beyond the admissible bound "
            f"{table.m_grid[-1]:.9g}"
        )


def lyapunov_F(model: Model, table: PotentialTable, u: Field) -> float:
    """Energy of a state: potential gap plus kernel interaction,

    F(u) = int [theta(u) - theta(mbar)] + (1/4) intint J (f(u)-f(u'))^2.

    Nonnegative by construction (global minimality of mbar, J >= 0); zero
    exactly at the constant state mbar.
    """
    if not table.matches(model):
        raise ValueError("potential table was built for a different model")
    _require_admissible(table, u.values)
    w = model.grid.weights
    theta_u = table.theta_at(u.values)
    local = float(np.dot(w, theta_u - table.theta_mbar))

    fu = model.f(u.values)
    diff = fu[:, None] - fu[None, :]
    interaction = 0.25 * float(
        np.einsum("i,j,ij->", w, w, model.kernel.matrix * diff * diff)
    )
    return local + interaction


def dissipation_integrand(model: Model, u: Field) -> np.ndarray:
    """Pointwise dissipation density; nonnegative for increasing f and g."""
    if model.beta <= 0:
        raise ValueError("dissipation needs beta > 0")
    rho = model.g.range_bound
    if rho is not None:
        delta = MARGIN_FRACTION * rho
        peak = float(np.max(np.abs(u.values)))
        if peak >= rho - delta:
            raise PotentialDomainError(
                f"state reaches {peak:.9g}; g^{{-1}} undefined beyond "
                f"{rho - delta:.9g}"
            )
    kf = apply_K_values(model.kernel, model.f(u.values), model.f_at_zero)
    first = kf + model.h - model.g.invert_array(u.values) / model.beta
    second = model.g(model.beta * kf + model.beta * model.h) - u.values
    return first * second * model.f.deriv(u.values)


def dissipation_I(model: Model, u: Field) -> float:
    """Dissipation rate I(u) = int (K f(u) + h - g^{-1}(u)/beta)
    (g(beta K f(u) + beta h) - u) f'(u) dx >= 0."""
    return float(np.dot(model.grid.weights, dissipation_integrand(model, u)))


@dataclass(frozen=True)
class DescentReport:
    """Per-step energy decrease and the discrete descent-identity residual."""

    energies: np.ndarray
    dissipations: np.ndarray
    monotone_slack: float        # max over steps of F_{k+1} - F_k
    identity_residual: float     # max over steps of |dF/dt + I|
    dt: float

    def monotone(self, tol: float = 1e-8) -> bool:
        return self.monotone_slack <= tol


def descent_check(model: Model, table: PotentialTable,
                  trajectory: Trajectory) -> DescentReport:
    """Evaluate the energy and dissipation along a stored trajectory and
    report the worst per-step increase and the worst defect of the
    forward-difference identity dF/dt = -I."""
    n_t = trajectory.n_times
    dt = trajectory.dt
    energies = np.empty(n_t)
    dissipations = np.empty(n_t)
    for k in range(n_t):
        state = trajectory.state(k)
        energies[k] = lyapunov_F(model, table, state)
        dissipations[k] = dissipation_I(model, state)
    deltas = np.diff(energies)
    residual = float(np.max(np.abs(deltas / dt + dissipations[:-1])))
    return DescentReport(
        energies=energies,
        dissipations=dissipations,
        monotone_slack=float(deltas.max()) if deltas.size else 0.0,
        identity_residual=residual,
        dt=dt,
    )


# ---------------------------------------------------------------------------
# Equilibrium solvers


@dataclass(eq=False)
class EquilibriumResult:
    """Converged equilibrium candidate with its certificates."""

    state: Field
    residual: float              # sup norm of u - F(u) = -rhs(u)
    iterations: int
    dissipation: float | None = None
    lyapunov: float | None = None
    residual_history: tuple[float, ...] = ()


def _certify(model: Model, values: np.ndarray, iterations: int,
             table: PotentialTable | None,
             history: Sequence[float]) -> EquilibriumResult:
    state = Field(model.grid, values)
    residual = float(np.max(np.abs(rhs_values(model, values))))
    dissipation = None
    try:
        dissipation = dissipation_I(model, state)
    except (PotentialDomainError, OutOfRangeError, ValueError):
        pass
    energy = None
    if table is not None and table.matches(model):
        try:
            energy = lyapunov_F(model, table, state)
        except PotentialDomainError:
            pass
    return EquilibriumResult(
        state=state, residual=residual, iterations=iterations,
        dissipation=dissipation, lyapunov=energy,
        residual_history=tuple(history),
    )


def solve_equilibrium_fixed_point(model: Model, u0: Field,
                                  damping: float = 1.0, tol: float = 1e-12,
                                  max_iter: int = 500,
                                  table: PotentialTable | None = None,
                                  ) -> EquilibriumResult:
    """Damped fixed-point iteration u <- (1-a) u + a F(u) down to
    ||u - F(u)||_inf <= tol."""
    if not 0 < damping <= 1:
        raise ValueError(f"damping must lie in (0, 1], got {damping}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    values = u0.values.copy()
    history = []
    for it in range(1, max_iter + 1):
        f_val = map_F_values(model, values)
        residual = float(np.max(np.abs(f_val - values)))
        history.append(residual)
        if residual <= tol:
            return _certify(model, values, it, table, history)
        values = values + damping * (f_val - values)
    raise NonConvergenceError(
        f"fixed-point solve stalled at residual {history[-1]:.3e} "
        f"after {max_iter} iterations",
        residual=history[-1],
    )


def refine_newton(model: Model, u: Field, tol: float = 1e-12,
                  table: PotentialTable | None = None,
                  max_newton: int = 25) -> EquilibriumResult:
    """Matrix-free Newton-Krylov polish of a near-equilibrium state.

    Solves Drhs(u) d = -rhs(u) with restarted GMRES (restart 30, absolute
    tolerance tol/10) and updates until ||rhs||_inf <= tol.  Raises
    RefineFailureError on Krylov stagnation or non-decreasing residuals,
    in which case the caller should fall back to the damped iteration.
    """
    values = u.values.copy()
    residual = rhs_values(model, values)
    res_norm = float(np.max(np.abs(residual)))
    if res_norm >= 0.1:
        raise ValueError(
            f"refine_newton expects a near-equilibrium start "
            f"(residual {res_norm:.3e} >= 0.1)"
        )
    n = model.grid.n_nodes
    history = [res_norm]
    for it in range(1, max_newton + 1):
        if res_norm <= tol:
            return _certify(model, values, it - 1, table, history)
        op = LinearOperator(
            (n, n),
            matvec=lambda v: jacobian_vector_values(model, values, v),
            dtype=float,
        )
        delta, info = gmres(op, -residual, rtol=1e-12, atol=tol / 10.0,
                            restart=30, maxiter=200)
        if info != 0:
            raise RefineFailureError(
                f"GMRES stagnated (info={info}) at residual {res_norm:.3e}"
            )
        values = values + delta
        residual = rhs_values(model, values)
        new_norm = float(np.max(np.abs(residual)))
        history.append(new_norm)
        if new_norm > tol and not new_norm < res_norm:
            raise RefineFailureError(
                f"Newton residual stopped decreasing at {new_norm:.3e}"
            )
        res_norm = new_norm
    raise RefineFailureError(
        f"Newton did not reach tolerance {tol:.1e} in {max_newton} steps "
        f"(residual {res_norm:.3e})"
    )
