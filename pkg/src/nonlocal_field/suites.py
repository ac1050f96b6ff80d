"""Scenario-driven verification suites.

Each suite checks one family of analytic guarantees on the configured
model and returns a verdict with the numeric slacks it measured.  Suites
whose hypotheses the model does not satisfy are skipped with a reason
rather than failed.  All randomness is drawn from generators seeded by
the scenario seed, so verdicts are reproducible byte for byte.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bounds import (
    GrowthConstants,
    SpaceTimeField,
    check_absorbing,
    compute_bounds,
    g_fixed_point,
    scalar_envelope,
    verify_ordering,
)
from .dynamics import Model, integrate
from .errors import (
    ContractionFailureError,
    HypothesisViolationError,
    InvalidCertificateError,
    NonConvergenceError,
    PotentialDomainError,
)
from .grid import Field
from .kernels import verify_boundK
from .lyapunov import build_potential_table, descent_check, solve_equilibrium_fixed_point
from .scenario import Scenario, build_initial_field

DEFAULT_SEED = 12345
BOUNDK_FIELDS = 100
BOUNDK_SLACK_TOL = 1e-10


@dataclass
class SuiteVerdict:
    name: str
    status: str                 # "pass" | "fail" | "skipped"
    reason: str | None = None
    details: dict = field(default_factory=dict)

    @property
    def failed(self) -> bool:
        return self.status == "fail"

    def to_mapping(self) -> dict:
        out = {"suite": self.name, "status": self.status}
        if self.reason is not None:
            out["reason"] = self.reason
        out["details"] = self.details
        return out


def _suite_seed(scenario: Scenario, salt: int) -> list[int]:
    base = scenario.run.seed if scenario.run.seed is not None else DEFAULT_SEED
    return [base, salt]


def suite_boundK(scenario: Scenario, model: Model) -> SuiteVerdict:
    """Operator-norm inequalities over seeded random fields, p in {1,2,inf}."""
    rng = np.random.default_rng(_suite_seed(scenario, 1))
    exponents = (1.0, 2.0, math.inf)
    min_slack = math.inf
    per_ineq: dict[str, float] = {}
    unit_min = math.inf
    for _ in range(BOUNDK_FIELDS):
        u = Field(model.grid, rng.standard_normal(model.grid.n_nodes))
        for p in exponents:
            report = verify_boundK(model.kernel, u, p)
            for c in report.checks:
                per_ineq[c.name] = min(per_ineq.get(c.name, math.inf), c.slack)
                min_slack = min(min_slack, c.slack)
            unit_min = min(unit_min, report.unit_contraction.slack)
    ok = min_slack >= -BOUNDK_SLACK_TOL
    return SuiteVerdict(
        name="boundK",
        status="pass" if ok else "fail",
        details={
            "fields": BOUNDK_FIELDS,
            "exponents": [1, 2, "inf"],
            "min_slack": min_slack,
            "per_inequality_min_slack": per_ineq,
            "unit_contraction_min_slack": unit_min,
            "tolerance": BOUNDK_SLACK_TOL,
        },
    )


def suite_absorbing(scenario: Scenario, model: Model) -> SuiteVerdict:
    """Entry into the predicted absorbing ball plus the decay-rate bound."""
    consts = GrowthConstants.from_model(model)
    product = consts.k1 * model.beta * consts.c1
    if product >= 1.0:
        return SuiteVerdict(
            name="absorbing", status="skipped",
            reason=f"hypothesis k1*beta*c1 < 1 violated (value {product:.6g})",
        )
    p, sigma = scenario.analysis.p, scenario.analysis.sigma
    report = compute_bounds(model, consts, p=p, sigma=sigma)
    if report.R <= 0.0:
        return SuiteVerdict(
            name="absorbing", status="skipped",
            reason="absorbing radius is zero (degenerate constants)",
        )

    u0 = build_initial_field(scenario, model.grid)
    norm0 = model.grid.norm(u0.values, p)
    if norm0 == 0.0:
        u0 = Field(model.grid, np.ones(model.grid.n_nodes))
        norm0 = model.grid.norm(u0.values, p)
    u0 = Field(model.grid, u0.values * (5.0 * report.R / norm0))

    recorder = None
    key = f"L{p:g}"
    if key not in ("L1", "L2"):
        recorder = {key: lambda fld: fld.grid.norm(fld.values, p)}
    traj = integrate(model, u0, scenario.run.t_end, scenario.run.dt,
                     scheme="etd1", recorder=recorder)
    verdict = check_absorbing(traj, report)
    ok = verdict.passed and verdict.entered
    return SuiteVerdict(
        name="absorbing",
        status="pass" if ok else "fail",
        reason=None if ok else "trajectory violated the absorbing-ball bound",
        details={
            "p": p, "sigma": sigma,
            "epsilon": report.epsilon,
            "radius": report.R,
            "decay_rate": report.decay_rate,
            "rho_infinity": report.rho,
            "initial_norm": 5.0 * report.R,
            "entered": verdict.entered,
            "first_entry_time": verdict.first_entry_time,
            "max_slope_outside": verdict.max_slope_outside,
            "required_slope": verdict.required_slope,
            "max_norm_after_entry": verdict.max_norm_after_entry,
        },
    )


def suite_comparison(scenario: Scenario, model: Model) -> SuiteVerdict:
    """Three-trajectory ordering, envelope domination and the contraction
    fixed point of the mild-solution operator."""
    if not (model.f.monotone and model.g.monotone):
        return SuiteVerdict(name="comparison", status="skipped",
                            reason="comparison needs monotone f and g")
    dt = scenario.run.dt
    horizon = min(scenario.run.t_end, 5.0)
    shift = 0.1

    u0 = build_initial_field(scenario, model.grid)
    mid = integrate(model, u0, horizon, dt)
    low = integrate(model, Field(model.grid, u0.values - shift), horizon, dt)
    high = integrate(model, Field(model.grid, u0.values + shift), horizon, dt)
    try:
        ordering = verify_ordering(
            model,
            SpaceTimeField.from_trajectory(low),
            SpaceTimeField.from_trajectory(mid),
            SpaceTimeField.from_trajectory(high),
        )
    except InvalidCertificateError as exc:
        return SuiteVerdict(name="comparison", status="fail",
                            reason=f"certificate rejected: {exc}")

    envelope_ok = True
    envelope_margin = None
    rho = model.g.range_bound
    if rho is not None and float(np.max(np.abs(u0.values))) <= rho:
        env = scalar_envelope(model, rho, horizon, dt)
        sup_traj = mid.records["Linf"]
        envelope_margin = float(np.max(sup_traj - env.values))
        envelope_ok = envelope_margin <= 1e-12

    t_fp = min(0.5, scenario.run.t_end)
    try:
        fp = g_fixed_point(model, u0, t_fp, dt, tol=1e-10)
    except (ContractionFailureError, HypothesisViolationError) as exc:
        return SuiteVerdict(name="comparison", status="fail",
                            reason=f"fixed-point iteration failed: {exc}")
    ref = integrate(model, u0, t_fp, dt)
    fp_gap = float(np.max(np.abs(fp.field.values - ref.values)))
    fp_tol = max(1e-3, dt)
    contraction_ok = fp.max_measured_ratio <= fp.contraction_bound + 1e-12

    ok = ordering.passed and envelope_ok and fp_gap <= fp_tol and contraction_ok
    return SuiteVerdict(
        name="comparison",
        status="pass" if ok else "fail",
        reason=None if ok else "ordering/envelope/fixed-point check failed",
        details={
            "shift": shift,
            "horizon": horizon,
            "max_lower_violation": ordering.max_lower_violation,
            "max_upper_violation": ordering.max_upper_violation,
            "envelope_margin": envelope_margin,
            "fixed_point_gap": fp_gap,
            "fixed_point_tolerance": fp_tol,
            "fixed_point_horizon": t_fp,
            "contraction_bound": fp.contraction_bound,
            "max_measured_ratio": fp.max_measured_ratio,
            "fixed_point_horizons": fp.horizons,
        },
    )


def suite_lyapunov(scenario: Scenario, model: Model) -> SuiteVerdict:
    """Energy descent along trajectories and first-order consistency of the
    discrete descent identity under step halving."""
    if model.g.range_bound is None:
        return SuiteVerdict(name="lyapunov", status="skipped",
                            reason="g declares no saturation bound")
    if model.beta <= 0:
        return SuiteVerdict(name="lyapunov", status="skipped",
                            reason="energy functional needs beta > 0")
    row_defect = float(np.max(np.abs(model.kernel.row_mass - 1.0)))
    if row_defect > 1e-6:
        return SuiteVerdict(
            name="lyapunov", status="skipped",
            reason=(f"descent identity needs unit kernel row mass on the "
                    f"domain (defect {row_defect:.3e})"),
        )

    rho = model.g.range_bound
    table = build_potential_table(model.f, model.g, model.beta, model.h)
    u0 = build_initial_field(scenario, model.grid)
    peak = float(np.max(np.abs(u0.values)))
    if peak > 0.9 * rho:
        u0 = Field(model.grid, u0.values * (0.9 * rho / peak))

    horizon = min(scenario.run.t_end, 2.0)
    dt = scenario.run.dt
    coarse = descent_check(model, table,
                           integrate(model, u0, horizon, dt))
    fine = descent_check(model, table,
                         integrate(model, u0, horizon, dt / 2.0))

    monotone_ok = coarse.monotone(1e-8) and fine.monotone(1e-8)
    ratio = None
    ratio_ok = True
    if fine.identity_residual > 1e-13:
        ratio = coarse.identity_residual / fine.identity_residual
        ratio_ok = 1.5 <= ratio <= 2.5

    ok = monotone_ok and ratio_ok
    return SuiteVerdict(
        name="lyapunov",
        status="pass" if ok else "fail",
        reason=None if ok else "descent monotonicity or identity scaling failed",
        details={
            "mbar": table.mbar,
            "theta_mbar": table.theta_mbar,
            "horizon": horizon,
            "monotone_slack_coarse": coarse.monotone_slack,
            "monotone_slack_fine": fine.monotone_slack,
            "identity_residual_coarse": coarse.identity_residual,
            "identity_residual_fine": fine.identity_residual,
            "residual_ratio": ratio,
        },
    )


def suite_equilibria(scenario: Scenario, model: Model) -> SuiteVerdict:
    """Fixed-point equilibrium solve with dissipation and scalar cross-checks."""
    u0 = build_initial_field(scenario, model.grid)
    try:
        result = solve_equilibrium_fixed_point(model, u0, damping=1.0,
                                               tol=1e-12, max_iter=5000)
    except NonConvergenceError as exc:
        return SuiteVerdict(name="equilibria", status="fail",
                            reason=f"solver did not converge: {exc}")
    except PotentialDomainError as exc:
        return SuiteVerdict(name="equilibria", status="fail",
                            reason=str(exc))

    residual_ok = result.residual <= 1e-10
    dissipation_ok = result.dissipation is None or result.dissipation <= 1e-8

    scalar_gap = None
    scalar_ok = True
    state = result.state.values
    row_defect = float(np.max(np.abs(model.kernel.row_mass - 1.0)))
    if row_defect <= 1e-8 and float(np.ptp(state)) <= 1e-8:
        m = float(np.mean(state))
        scalar_gap = abs(m - _scalar_equilibrium_near(model, m))
        scalar_ok = scalar_gap <= 1e-9

    ok = residual_ok and dissipation_ok and scalar_ok
    return SuiteVerdict(
        name="equilibria",
        status="pass" if ok else "fail",
        reason=None if ok else "equilibrium certificates failed",
        details={
            "residual": result.residual,
            "iterations": result.iterations,
            "dissipation": result.dissipation,
            "lyapunov": result.lyapunov,
            "constant_state": scalar_gap is not None,
            "scalar_root_gap": scalar_gap,
        },
    )


def _scalar_equilibrium_near(model: Model, m: float, width: float = 0.5) -> float:
    """Bisection root of m = g(beta (f(m) + h)) near a given value."""
    def fn(x: float) -> float:
        return float(model.g(model.beta * (float(model.f(x)) + model.h))) - x

    lo, hi = m - width, m + width
    flo, fhi = fn(lo), fn(hi)
    expand = 0
    while flo * fhi > 0 and expand < 60:
        lo -= width
        hi += width
        flo, fhi = fn(lo), fn(hi)
        expand += 1
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fmid = fn(mid)
        if fmid == 0.0:
            return mid
        if flo * fmid < 0:
            hi, fhi = mid, fmid
        else:
            lo, flo = mid, fmid
    return 0.5 * (lo + hi)


SUITES = {
    "boundK": suite_boundK,
    "absorbing": suite_absorbing,
    "comparison": suite_comparison,
    "lyapunov": suite_lyapunov,
    "equilibria": suite_equilibria,
}


def run_suite(name: str, scenario: Scenario, model: Model) -> SuiteVerdict:
    try:
        return SUITES[name](scenario, model)
    except HypothesisViolationError as exc:
        return SuiteVerdict(name=name, status="skipped", reason=str(exc))
