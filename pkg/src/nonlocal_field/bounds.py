"""Explicit dissipativity bounds and the comparison-principle machinery.

Two kinds of artifacts live here.  The first are closed-form bounds driven
by the declared growth constants: the absorbing radius and decay rate of
the L^p norm, and the L-infinity ball that ultimately confines the flow.
The second is the space-time integral operator whose fixed points are mild
solutions; it is monotone for monotone nonlinearities and a contraction on
short horizons, which is what the sub/supersolution ordering tests lean on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import Model, Trajectory, integrate, rhs_values
from .errors import (
    ContractionFailureError,
    GridMismatchError,
    HypothesisViolationError,
    InvalidCertificateError,
    InvalidExponentError,
)
from .grid import DomainGrid, Field, conjugate_exponent
from .kernels import apply_K_values
from .nonlinearity import lipschitz_on_interval


@dataclass(frozen=True)
class GrowthConstants:
    """Linear envelopes |g| <= k1|x| + k2 and |f| <= c1|x| + c2."""

    k1: float
    k2: float
    c1: float
    c2: float

    @staticmethod
    def from_model(model: Model) -> "GrowthConstants":
        k1, k2 = model.g.growth
        c1, c2 = model.f.growth
        return GrowthConstants(k1=k1, k2=k2, c1=c1, c2=c2)


@dataclass
class BoundsReport:
    """Absorbing-ball data: radius R, contraction margin and decay rate,
    plus (once filled) the L-infinity bound rho."""

    epsilon: float
    R: float
    decay_rate: float
    sigma: float
    p: float
    rho: float | None = None


def absorbing_radius(model: Model, consts: GrowthConstants | None = None,
                     p: float = 2.0, sigma: float = 1.0) -> BoundsReport:
    """Radius of the L^p ball that absorbs every trajectory.

    R = (1+sigma) (k1 b c2 + k1 b h + k2) |Omega|^{1/p} / (1 - k1 b c1)
    with b = beta, valid when k1*beta*c1 < 1; outside the ball the p-th
    power of the norm decays at least at rate sigma*p*(1-k1 b c1)/(1+sigma).
    """
    if consts is None:
        consts = GrowthConstants.from_model(model)
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    if p < 1 or math.isinf(p):
        raise InvalidExponentError(f"p must satisfy 1 <= p < inf, got {p}")
    epsilon = 1.0 - consts.k1 * model.beta * consts.c1
    if epsilon <= 0:
        raise HypothesisViolationError(
            f"absorbing ball needs k1*beta*c1 < 1, got "
            f"{consts.k1 * model.beta * consts.c1:.6g}"
        )
    numer = (consts.k1 * model.beta * consts.c2
             + consts.k1 * model.beta * model.h
             + consts.k2)
    R = (1.0 + sigma) * numer * model.grid.measure ** (1.0 / p) / epsilon
    decay = sigma * p * epsilon / (1.0 + sigma)
    return BoundsReport(epsilon=epsilon, R=R, decay_rate=decay, sigma=sigma, p=p)


def linfty_rho(model: Model, consts: GrowthConstants | None = None,
               p: float = 2.0, R: float | None = None) -> float:
    """Sup-norm bound confining the long-time dynamics:
    rho = k1 b ||J||_q (c1 R + c2 |Omega|^{1/p}) + k1 b h + k2."""
    if consts is None:
        consts = GrowthConstants.from_model(model)
    if R is None:
        R = absorbing_radius(model, consts, p=p).R
    q = conjugate_exponent(p)
    jq = model.kernel.norm(q)
    kb = consts.k1 * model.beta
    return (kb * jq * (consts.c1 * R + consts.c2 * model.grid.measure ** (1.0 / p))
            + kb * model.h + consts.k2)


def compute_bounds(model: Model, consts: GrowthConstants | None = None,
                   p: float = 2.0, sigma: float = 1.0) -> BoundsReport:
    """Absorbing radius together with the L-infinity bound it implies."""
    report = absorbing_radius(model, consts, p=p, sigma=sigma)
    report.rho = linfty_rho(model, consts, p=p, R=report.R)
    return report


@dataclass(frozen=True)
class AbsorbingVerdict:
    """Outcome of checking a trajectory against the absorbing-ball bound."""

    passed: bool
    decay_ok: bool
    containment_ok: bool
    entered: bool
    first_entry_time: float | None
    max_slope_outside: float | None    # max discrete d/dt log ||u||_p^p outside
    max_norm_after_entry: float | None
    required_slope: float


def check_absorbing(trajectory: Trajectory, report: BoundsReport,
                    slope_slack: float = 0.1,
                    containment_rtol: float = 1e-6) -> AbsorbingVerdict:
    """Check that (a) outside the ball the log of ||u||_p^p decays at least
    at 90% of the predicted rate and (b) once inside, the trajectory never
    leaves the ball again (up to a relative tolerance)."""
    norms = _norm_record(trajectory, report.p)
    times = trajectory.times
    R = report.R
    required = -report.decay_rate * (1.0 - slope_slack)

    max_slope = None
    decay_ok = True
    for k in range(len(norms) - 1):
        if norms[k] >= R and norms[k] > 0 and norms[k + 1] > 0:
            dt = times[k + 1] - times[k]
            slope = report.p * (math.log(norms[k + 1]) - math.log(norms[k])) / dt
            if max_slope is None or slope > max_slope:
                max_slope = slope
            if slope > required:
                decay_ok = False

    inside = np.flatnonzero(norms < R)
    if inside.size:
        first = int(inside[0])
        after = norms[first:]
        max_after = float(after.max())
        containment_ok = bool(max_after <= R * (1.0 + containment_rtol))
        entry_time = float(times[first])
    else:
        first = None
        max_after = None
        containment_ok = False
        entry_time = None

    return AbsorbingVerdict(
        passed=decay_ok and containment_ok,
        decay_ok=decay_ok,
        containment_ok=containment_ok,
        entered=inside.size > 0,
        first_entry_time=entry_time,
        max_slope_outside=max_slope,
        max_norm_after_entry=max_after,
        required_slope=required,
    )


def _norm_record(trajectory: Trajectory, p: float) -> np.ndarray:
    key = "Linf" if math.isinf(p) else f"L{p:g}"
    if key in trajectory.records:
        return trajectory.records[key]
    return np.array([
        trajectory.grid.norm(trajectory.values[k], p)
        for k in range(trajectory.n_times)
    ])


@dataclass(eq=False)
class ScalarTrajectory:
    times: np.ndarray
    values: np.ndarray

    @property
    def final(self) -> float:
        return float(self.values[-1])


def scalar_envelope(model: Model, rho: float, t_end: float, dt: float,
                    ) -> ScalarTrajectory:
    """Spatially constant envelope: dL/dt = -L + g(beta (f(L) + h)), L(0) = rho.

    Stepped with the same exponential scheme as field trajectories, so the
    pointwise domination ||u(t)||_inf <= L(t) is preserved step by step for
    monotone f, g and kernels with row mass <= 1 (f reduces to the identity
    in the classical statement of the envelope equation).
    """
    n_steps = max(1, int(round(t_end / dt)))
    times = dt * np.arange(n_steps + 1)
    values = np.empty(n_steps + 1)
    values[0] = rho
    lam = rho
    decay = math.exp(-dt)
    gain = -math.expm1(-dt)
    for k in range(n_steps):
        lam = decay * lam + gain * float(
            model.g(model.beta * (float(model.f(lam)) + model.h))
        )
        values[k + 1] = lam
    return ScalarTrajectory(times=times, values=values)


# ---------------------------------------------------------------------------
# Space-time fields and the mild-solution operator


@dataclass(eq=False)
class SpaceTimeField:
    """Field values on a uniform time grid; one row per instant."""

    grid: DomainGrid
    times: np.ndarray
    values: np.ndarray      # (n_times, n_nodes)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.times.shape[0], self.grid.n_nodes):
            raise GridMismatchError(
                f"values shape {self.values.shape} does not match "
                f"{self.times.shape[0]} times x {self.grid.n_nodes} nodes"
            )
        if self.times.shape[0] < 2:
            raise ValueError("need at least two time levels")
        steps = np.diff(self.times)
        if steps.min() <= 0 or np.ptp(steps) > 1e-12 * steps.max():
            raise ValueError("time grid must be uniform and increasing")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("space-time field must be finite")

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    @staticmethod
    def from_trajectory(trajectory: Trajectory) -> "SpaceTimeField":
        return SpaceTimeField(trajectory.grid, trajectory.times,
                              trajectory.values.copy())

    @staticmethod
    def constant_in_time(field: Field, times: np.ndarray) -> "SpaceTimeField":
        values = np.tile(field.values, (len(times), 1))
        return SpaceTimeField(field.grid, np.asarray(times, dtype=float), values)


def g_operator_apply(model: Model, w: SpaceTimeField) -> SpaceTimeField:
    """Mild-solution operator anchored at the first time level:

    G(w)(x,t) = e^{-(t-t0)} w(x,t0)
                + int_t0^t e^{-(t-s)} g(beta K(f(w))(x,s) + beta h) ds.

    The nonlinear term is interpolated trapezoid-style (piecewise linear
    on the stored time grid) while the exponential factor is integrated
    exactly, so constant-in-time inputs reproduce the closed form
    e^{-t} w0 + (1 - e^{-t}) g(...) to machine precision.  G(w) and w
    agree exactly at t0.
    """
    if w.grid is not model.grid:
        raise GridMismatchError("space-time field lives on a different grid")
    dt = w.dt
    n_t = w.times.shape[0]
    phi = np.empty_like(w.values)
    for k in range(n_t):
        kf = apply_K_values(model.kernel, model.f(w.values[k]), model.f_at_zero)
        phi[k] = model.g(model.beta * kf + model.beta * model.h)

    # exact panel weights for a linear integrand against e^{-(t-s)}:
    # int_0^dt e^{-(dt-s)} ds = gain, split between the two endpoints
    decay = math.exp(-dt)
    gain = -math.expm1(-dt)
    w_right = 1.0 - gain / dt
    w_left = gain - w_right

    out = np.empty_like(w.values)
    out[0] = w.values[0]
    integral = np.zeros(w.grid.n_nodes)
    elapsed = 1.0
    for k in range(1, n_t):
        integral = decay * integral + w_left * phi[k - 1] + w_right * phi[k]
        elapsed *= decay
        out[k] = elapsed * w.values[0] + integral
    return SpaceTimeField(w.grid, w.times.copy(), out)


@dataclass(eq=False)
class GFixedPointResult:
    """Converged fixed point of the mild-solution operator plus diagnostics."""

    field: SpaceTimeField
    residual: float
    iterations: int
    contraction_bound: float          # max over horizons of beta*N*M*tau
    measured_ratios: list[float]      # successive-iterate ratios, all horizons
    horizons: int

    @property
    def max_measured_ratio(self) -> float:
        return max(self.measured_ratios) if self.measured_ratios else 0.0


def _lipschitz_data(model: Model, sup0: float) -> tuple[float, float, float]:
    """Lipschitz constants (M for f, N for g) on the invariant sup-norm ball."""
    k1, k2 = model.g.growth
    c1, c2 = model.f.growth
    if model.g.range_bound is not None:
        reach = max(sup0, model.g.range_bound)
    else:
        shrink = 1.0 - k1 * model.beta * c1
        if shrink <= 0:
            raise HypothesisViolationError(
                "need a bounded response or k1*beta*c1 < 1 to confine iterates"
            )
        steady = (k1 * model.beta * (c2 + model.h) + k2) / shrink
        reach = max(sup0, steady)
    m_const = lipschitz_on_interval(model.f, (-reach, reach))
    arg = model.beta * (c1 * reach + c2 + model.h)
    n_const = lipschitz_on_interval(model.g, (-arg, arg))
    return m_const, n_const, reach


def g_fixed_point(model: Model, u0: Field, t_end: float, dt: float,
                  tol: float = 1e-10, max_iter: int = 1000,
                  target_factor: float = 0.5) -> GFixedPointResult:
    """Iterate w <- G(w) to the mild solution on [0, t_end].

    The horizon is split into sub-horizons short enough that the iteration
    contracts with factor beta*N*M*tau <= target_factor, then solved
    segment by segment, each anchored at the previous segment's final
    slice.  Raises ContractionFailureError if an iteration stalls.
    """
    if not t_end > 0 or not dt > 0:
        raise ValueError("t_end and dt must be positive")
    n_steps = max(1, int(round(t_end / dt)))
    times = dt * np.arange(n_steps + 1)
    m_const, n_const, _ = _lipschitz_data(model, float(np.max(np.abs(u0.values))))
    rate = model.beta * n_const * m_const

    n_sub = 1
    if rate * t_end > target_factor:
        n_sub = int(math.ceil(rate * t_end / target_factor))
    n_sub = min(n_sub, n_steps)
    edges = np.unique(np.linspace(0, n_steps, n_sub + 1).round().astype(int))

    full = np.empty((n_steps + 1, model.grid.n_nodes))
    full[0] = u0.values
    total_iters = 0
    worst_residual = 0.0
    ratios: list[float] = []
    bound = 0.0

    for a, b in zip(edges[:-1], edges[1:]):
        local_times = times[a:b + 1]
        bound = max(bound, rate * (local_times[-1] - local_times[0]))
        anchor = Field(model.grid, full[a])
        w = SpaceTimeField.constant_in_time(anchor, local_times)
        prev_delta = None
        for _ in range(max_iter):
            total_iters += 1
            w_next = g_operator_apply(model, w)
            delta = float(np.max(np.abs(w_next.values - w.values)))
            if prev_delta is not None and prev_delta > 10 * tol:
                ratios.append(delta / prev_delta)
            w = w_next
            if delta <= tol:
                break
            prev_delta = delta
        else:
            raise ContractionFailureError(
                f"fixed-point iteration stalled at update {delta:.3e} "
                f"(tolerance {tol:.1e})"
            )
        worst_residual = max(worst_residual, delta)
        full[a:b + 1] = w.values

    return GFixedPointResult(
        field=SpaceTimeField(model.grid, times, full),
        residual=worst_residual,
        iterations=total_iters,
        contraction_bound=bound,
        measured_ratios=ratios,
        horizons=len(edges) - 1,
    )


@dataclass(frozen=True)
class OrderingVerdict:
    """Pointwise ordering of a (sub, solution, super) triple in space-time."""

    passed: bool
    max_lower_violation: float    # max of sub - sol
    max_upper_violation: float    # max of sol - super
    certificate_tol: float


def _certificate_defect(model: Model, w: SpaceTimeField, kind: str) -> float:
    """Worst signed defect of the differential inequality for a claimed
    sub/supersolution ('sub': dw/dt <= rhs; 'super': >=; 'sol': equality)."""
    dt = w.dt
    worst = -math.inf
    for k in range(w.times.shape[0] - 1):
        deriv = (w.values[k + 1] - w.values[k]) / dt
        gap = deriv - rhs_values(model, w.values[k])
        if kind == "sub":
            defect = float(gap.max())
        elif kind == "super":
            defect = float((-gap).max())
        else:
            defect = float(np.abs(gap).max())
        worst = max(worst, defect)
    return worst


def verify_ordering(model: Model, sub: SpaceTimeField, sol: SpaceTimeField,
                    sup: SpaceTimeField,
                    order_tol: float = 1e-10) -> OrderingVerdict:
    """Validate the sub/supersolution certificates against the discrete
    time derivative (tolerance 10*dt), then check
    sub <= sol <= super at every node and time."""
    for w in (sub, sol, sup):
        if w.grid is not model.grid:
            raise GridMismatchError("fields live on a different grid")
        if w.values.shape != sol.values.shape:
            raise GridMismatchError("space-time fields must share the time grid")

    cert_tol = 10.0 * sol.dt
    for w, kind, label in ((sub, "sub", "subsolution"),
                           (sup, "super", "supersolution"),
                           (sol, "sol", "solution")):
        defect = _certificate_defect(model, w, kind)
        if defect > cert_tol:
            raise InvalidCertificateError(
                f"{label} violates its defining inequality by {defect:.3e} "
                f"(tolerance {cert_tol:.3e})"
            )

    lower = float((sub.values - sol.values).max())
    upper = float((sol.values - sup.values).max())
    return OrderingVerdict(
        passed=lower <= order_tol and upper <= order_tol,
        max_lower_violation=lower,
        max_upper_violation=upper,
        certificate_tol=cert_tol,
    )
