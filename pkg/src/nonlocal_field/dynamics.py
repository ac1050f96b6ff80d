"""Right-hand side and time integration for the nonlocal evolution model.

The state obeys  du/dt = -u + g(beta * K(f(u)) + beta * h)  with u = 0
outside the domain, so K sees the exterior through f(0) times the kernel
tail mass.  The workhorse integrator is the first-order exponential scheme
obtained by freezing the nonlinear term in the variation-of-constants
formula; it treats the linear decay exactly and maps any ball that the
nonlinear response maps into itself into itself (convex combination).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .errors import (
    DivergenceError,
    GridMismatchError,
    InvalidStepError,
    NumericalOverflowError,
)
from .grid import DomainGrid, Field, require_same_grid
from .kernels import Kernel, apply_K_values
from .nonlinearity import Nonlinearity


@dataclass(eq=False)
class Model:
    """Everything needed to evaluate the right-hand side."""

    grid: DomainGrid
    kernel: Kernel
    f: Nonlinearity
    g: Nonlinearity
    beta: float
    h: float

    def __post_init__(self):
        if self.kernel.grid is not self.grid:
            raise GridMismatchError("kernel was built on a different grid")
        if self.beta < 0:
            raise ValueError(f"beta must be nonnegative, got {self.beta}")
        if self.h < 0:
            raise ValueError(f"h must be nonnegative, got {self.h}")
        # f(0) enters every K application through the exterior tail
        self.f_at_zero = float(self.f(0.0))


def map_F_values(model: Model, values: np.ndarray) -> np.ndarray:
    kf = apply_K_values(model.kernel, model.f(values), model.f_at_zero)
    if not np.all(np.isfinite(kf)):
        # a saturating g would silently mask the overflow downstream
        raise NumericalOverflowError("kernel application produced non-finite values")
    out = model.g(model.beta * kf + model.beta * model.h)
    if not np.all(np.isfinite(out)):
        raise NumericalOverflowError("nonlinear response produced non-finite values")
    return out


def rhs_values(model: Model, values: np.ndarray) -> np.ndarray:
    return map_F_values(model, values) - values


def map_F(model: Model, u: Field) -> Field:
    """Nonlinear response F(u) = g(beta * K(f(u)) + beta * h)."""
    require_same_grid(model.grid, u.grid)
    return Field(u.grid, map_F_values(model, u.values), u.time)


def rhs(model: Model, u: Field) -> Field:
    """Full right-hand side -u + F(u); vanishes exactly at equilibria."""
    require_same_grid(model.grid, u.grid)
    return Field(u.grid, rhs_values(model, u.values), u.time)


def jacobian_vector_values(model: Model, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    a = model.beta * apply_K_values(model.kernel, model.f(u), model.f_at_zero) \
        + model.beta * model.h
    kv = apply_K_values(model.kernel, model.f.deriv(u) * v, 0.0)
    out = -v + model.g.deriv(a) * model.beta * kv
    if not np.all(np.isfinite(out)):
        raise NumericalOverflowError("Jacobian action produced non-finite values")
    return out


def jacobian_vector(model: Model, u: Field, v: Field) -> Field:
    """Derivative of the right-hand side at u applied to a direction v:
    -v + g'(beta*K(f(u)) + beta*h) * beta * K(f'(u) v), with exterior 0
    for the second K application (directions vanish outside the domain)."""
    require_same_grid(model.grid, u.grid)
    require_same_grid(model.grid, v.grid)
    return Field(u.grid, jacobian_vector_values(model, u.values, v.values), u.time)


def _check_dt(dt: float) -> None:
    if not dt > 0:
        raise InvalidStepError(f"time step must be positive, got {dt}")


def step_etd1_values(model: Model, values: np.ndarray, dt: float) -> np.ndarray:
    decay = math.exp(-dt)
    return decay * values - math.expm1(-dt) * map_F_values(model, values)


def step_rk4_values(model: Model, values: np.ndarray, dt: float) -> np.ndarray:
    k1 = rhs_values(model, values)
    k2 = rhs_values(model, values + 0.5 * dt * k1)
    k3 = rhs_values(model, values + 0.5 * dt * k2)
    k4 = rhs_values(model, values + dt * k3)
    return values + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def step_etd1(model: Model, u: Field, dt: float) -> Field:
    """One exponential step: u+ = e^{-dt} u + (1 - e^{-dt}) F(u).

    Exact for the linear part; a convex combination of u and F(u), so any
    sup-norm ball containing both is preserved exactly.
    """
    _check_dt(dt)
    require_same_grid(model.grid, u.grid)
    return Field(u.grid, step_etd1_values(model, u.values, dt), u.time + dt)


def step_rk4(model: Model, u: Field, dt: float) -> Field:
    """Classical four-stage Runge-Kutta step on the full right-hand side."""
    _check_dt(dt)
    require_same_grid(model.grid, u.grid)
    return Field(u.grid, step_rk4_values(model, u.values, dt), u.time + dt)


STEPPERS: dict[str, Callable[[Model, np.ndarray, float], np.ndarray]] = {
    "etd1": step_etd1_values,
    "rk4": step_rk4_values,
}


@dataclass(eq=False)
class Trajectory:
    """Time-ordered states on a shared grid plus per-time scalar records."""

    grid: DomainGrid
    times: np.ndarray           # (n_times,)
    values: np.ndarray          # (n_times, n_nodes)
    records: dict[str, np.ndarray] = field(default_factory=dict)
    scheme: str = "etd1"

    @property
    def n_times(self) -> int:
        return self.times.shape[0]

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    def state(self, k: int) -> Field:
        return Field(self.grid, self.values[k], float(self.times[k]))

    @property
    def final(self) -> Field:
        return self.state(self.n_times - 1)


def integrate(model: Model, u0: Field, t_end: float, dt: float,
              scheme: str = "etd1",
              recorder: Mapping[str, Callable[[Field], float]] | None = None,
              ) -> Trajectory:
    """Integrate from u0 to t_end, recording norms (and any extra scalar
    recorders) at every step.  Raises DivergenceError, carrying the failure
    time, if the state stops being finite."""
    _check_dt(dt)
    if not t_end > 0:
        raise InvalidStepError(f"t_end must be positive, got {t_end}")
    require_same_grid(model.grid, u0.grid)
    try:
        stepper = STEPPERS[scheme]
    except KeyError:
        raise ValueError(
            f"unknown scheme '{scheme}'; available: {', '.join(sorted(STEPPERS))}"
        ) from None

    n_steps = max(1, int(round(t_end / dt)))
    times = u0.time + dt * np.arange(n_steps + 1)
    states = np.empty((n_steps + 1, model.grid.n_nodes))
    states[0] = u0.values

    record_names = ["L1", "L2", "Linf"]
    extra = dict(recorder) if recorder else {}
    records: dict[str, list[float]] = {name: [] for name in record_names}
    for name in extra:
        records[name] = []

    def record(k: int) -> None:
        vals = states[k]
        records["L1"].append(model.grid.norm(vals, 1))
        records["L2"].append(model.grid.norm(vals, 2))
        records["Linf"].append(model.grid.norm(vals, math.inf))
        if extra:
            fld = Field(model.grid, vals, float(times[k]))
            for name, fn in extra.items():
                records[name].append(float(fn(fld)))

    record(0)
    current = states[0]
    for k in range(n_steps):
        try:
            nxt = stepper(model, current, dt)
        except NumericalOverflowError as exc:
            raise DivergenceError(
                f"state diverged at t = {times[k]:.6g}", time=float(times[k])
            ) from exc
        if not np.all(np.isfinite(nxt)):
            raise DivergenceError(
                f"state diverged at t = {times[k + 1]:.6g}", time=float(times[k + 1])
            )
        states[k + 1] = nxt
        current = nxt
        record(k + 1)

    return Trajectory(
        grid=model.grid,
        times=times,
        values=states,
        records={name: np.asarray(vals) for name, vals in records.items()},
        scheme=scheme,
    )
