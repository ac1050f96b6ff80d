"""Scalar nonlinearities with declared growth and Lipschitz metadata.

The analytic estimates in the toolkit are parameterized by the linear
growth envelopes |phi(x)| <= a|x| + b and |phi'(x)| <= a'|x| + b'.  The
constants are declared per family and verified by sampling, never
inferred, so bound formulas and their tests share the same numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import OutOfRangeError

BISECTION_MAX_ITER = 60
BISECTION_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Nonlinearity:
    """A scalar response function with derivative, optional inverse and
    growth metadata.

    ``monotone`` means nondecreasing; families used as invertible responses
    (saturating g, gain f) are strictly increasing on the intervals where
    an inverse is ever requested.  ``range_bound`` is a strict bound rho
    with |phi(x)| < rho for all x (saturating families only).
    """

    name: str
    fn: Callable[[np.ndarray], np.ndarray]
    deriv_fn: Callable[[np.ndarray], np.ndarray]
    growth: tuple[float, float]
    deriv_growth: tuple[float, float]
    monotone: bool = True
    range_bound: float | None = None
    inverse_fn: Callable[[np.ndarray], np.ndarray] | None = None
    params: dict = field(default_factory=dict)

    def __call__(self, x):
        return self.fn(np.asarray(x, dtype=float))

    def deriv(self, x):
        return self.deriv_fn(np.asarray(x, dtype=float))

    @property
    def has_inverse(self) -> bool:
        return self.inverse_fn is not None

    def invert(self, y: float, bracket: tuple[float, float] | None = None) -> float:
        """phi^{-1}(y), exact when a closed form exists, else bisection."""
        if self.inverse_fn is not None:
            return float(self.inverse_fn(np.asarray(y, dtype=float)))
        if bracket is None:
            bracket = _auto_bracket(self, y)
        return numeric_inverse(self, y, bracket)

    def invert_array(self, y: np.ndarray,
                     bracket: tuple[float, float] | None = None) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if self.inverse_fn is not None:
            return self.inverse_fn(y)
        if bracket is None:
            lo = _auto_bracket(self, float(y.min()))
            hi = _auto_bracket(self, float(y.max()))
            bracket = (min(lo[0], hi[0]), max(lo[1], hi[1]))
        return _bisect_array(self, y, bracket)


@dataclass(frozen=True)
class GrowthReport:
    """Sampled verification of the declared growth envelopes."""

    passed: bool
    value_margin: float       # min over samples of (a|x| + b) - |phi(x)|
    deriv_margin: float       # min over samples of (a'|x| + b') - |phi'(x)|
    worst_x: float

    @property
    def value_ok(self) -> bool:
        return self.value_margin >= 0.0

    @property
    def deriv_ok(self) -> bool:
        return self.deriv_margin >= 0.0


def check_growth(phi: Nonlinearity, sample_range: tuple[float, float],
                 n_samples: int = 1000) -> GrowthReport:
    """Verify |phi| and |phi'| against their declared envelopes on a uniform
    sample (endpoints included) of ``sample_range``."""
    if n_samples < 100:
        raise ValueError(f"n_samples must be >= 100, got {n_samples}")
    lo, hi = sample_range
    xs = np.linspace(lo, hi, n_samples)
    a, b = phi.growth
    ap, bp = phi.deriv_growth
    value_gap = a * np.abs(xs) + b - np.abs(phi(xs))
    deriv_gap = ap * np.abs(xs) + bp - np.abs(phi.deriv(xs))
    gaps = np.minimum(value_gap, deriv_gap)
    worst = int(np.argmin(gaps))
    return GrowthReport(
        passed=bool(value_gap.min() >= 0.0 and deriv_gap.min() >= 0.0),
        value_margin=float(value_gap.min()),
        deriv_margin=float(deriv_gap.min()),
        worst_x=float(xs[worst]),
    )


def lipschitz_on_interval(phi: Nonlinearity, interval: tuple[float, float],
                          n_samples: int = 10_000) -> float:
    """Lipschitz constant on a bounded interval: sampled max of |phi'|,
    inflated by a 1.01 safety factor."""
    lo, hi = interval
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise ValueError("interval must be bounded")
    xs = np.linspace(lo, hi, n_samples)
    return 1.01 * float(np.max(np.abs(phi.deriv(xs))))


def numeric_inverse(phi: Nonlinearity, y: float,
                    bracket: tuple[float, float]) -> float:
    """Solve phi(x) = y by bisection on a bracket where phi is strictly
    monotone; stops at |phi(x) - y| <= 1e-12 or 60 iterations."""
    lo, hi = float(bracket[0]), float(bracket[1])
    flo = float(phi(lo)) - y
    fhi = float(phi(hi)) - y
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if flo * fhi > 0.0:
        raise OutOfRangeError(
            f"target {y} outside phi(bracket) = [{flo + y}, {fhi + y}]"
        )
    for _ in range(BISECTION_MAX_ITER):
        mid = 0.5 * (lo + hi)
        fmid = float(phi(mid)) - y
        if abs(fmid) <= BISECTION_TOL:
            return mid
        if flo * fmid <= 0.0:
            hi, fhi = mid, fmid
        else:
            lo, flo = mid, fmid
    return 0.5 * (lo + hi)


def _bisect_array(phi: Nonlinearity, y: np.ndarray,
                  bracket: tuple[float, float]) -> np.ndarray:
    lo = np.full(y.shape, float(bracket[0]))
    hi = np.full(y.shape, float(bracket[1]))
    flo = phi(lo) - y
    fhi = phi(hi) - y
    if np.any(flo * fhi > 0.0):
        bad = y[flo * fhi > 0.0]
        raise OutOfRangeError(f"targets outside phi(bracket), e.g. {bad.flat[0]}")
    for _ in range(BISECTION_MAX_ITER):
        mid = 0.5 * (lo + hi)
        fmid = phi(mid) - y
        take_hi = flo * fmid <= 0.0
        hi = np.where(take_hi, mid, hi)
        fhi = np.where(take_hi, fmid, fhi)
        lo = np.where(take_hi, lo, mid)
        flo = np.where(take_hi, flo, fmid)
    return 0.5 * (lo + hi)


def _auto_bracket(phi: Nonlinearity, y: float,
                  max_width: float = 1e12) -> tuple[float, float]:
    """Expand a bracket [-B, B] until it straddles y (monotone phi)."""
    b = 1.0
    while b <= max_width:
        if (float(phi(-b)) - y) * (float(phi(b)) - y) <= 0.0:
            return (-b, b)
        b *= 2.0
    raise OutOfRangeError(f"could not bracket inverse target {y}")


# ---------------------------------------------------------------------------
# Built-in families


def make_identity() -> Nonlinearity:
    return Nonlinearity(
        name="identity",
        fn=lambda x: x,
        deriv_fn=lambda x: np.ones_like(x),
        growth=(1.0, 0.0),
        deriv_growth=(0.0, 1.0),
        inverse_fn=lambda y: y,
    )


def make_tanh() -> Nonlinearity:
    return Nonlinearity(
        name="tanh",
        fn=np.tanh,
        deriv_fn=lambda x: 1.0 - np.tanh(x) ** 2,
        growth=(0.0, 1.0),
        deriv_growth=(0.0, 1.0),
        range_bound=1.0,
        inverse_fn=np.arctanh,
    )


def make_scaled_tanh(rho: float = 1.0, tau: float = 1.0) -> Nonlinearity:
    if rho <= 0 or tau <= 0:
        raise ValueError("scaled_tanh needs rho > 0 and tau > 0")
    return Nonlinearity(
        name="scaled_tanh",
        fn=lambda x: rho * np.tanh(x / tau),
        deriv_fn=lambda x: (rho / tau) * (1.0 - np.tanh(x / tau) ** 2),
        growth=(0.0, rho),
        deriv_growth=(0.0, rho / tau),
        range_bound=rho,
        inverse_fn=lambda y: tau * np.arctanh(y / rho),
        params={"rho": rho, "tau": tau},
    )


def make_linear(a: float = 1.0, b: float = 0.0) -> Nonlinearity:
    if a == 0:
        raise ValueError("linear family needs a != 0")
    return Nonlinearity(
        name="linear",
        fn=lambda x: a * x + b,
        deriv_fn=lambda x: np.full_like(x, a),
        growth=(abs(a), abs(b)),
        deriv_growth=(0.0, abs(a)),
        monotone=a > 0,
        inverse_fn=lambda y: (y - b) / a,
        params={"a": a, "b": b},
    )


def make_ramp(s: float = 1.0, blend: float | None = None) -> Nonlinearity:
    """Saturating ramp: identity up to s - blend, constant s beyond
    s + blend, joined by the C^1 cubic Hermite shoulder (odd in x).

    On the shoulder the derivative decays linearly from 1 to 0, so the
    ramp is monotone (nondecreasing) and 1-Lipschitz but not strictly
    increasing past the shoulder.
    """
    if s <= 0:
        raise ValueError("ramp needs s > 0")
    b = 0.5 * s if blend is None else float(blend)
    if not 0 < b <= s:
        raise ValueError("blend width must lie in (0, s]")
    lo, hi = s - b, s + b

    def fn(x):
        x = np.asarray(x, dtype=float)
        ax = np.abs(x)
        t = np.clip((ax - lo) / (2.0 * b), 0.0, 1.0)
        shoulder = lo + 2.0 * b * t - b * t * t
        out = np.where(ax <= lo, ax, np.where(ax >= hi, s, shoulder))
        return np.sign(x) * out

    def deriv_fn(x):
        x = np.asarray(x, dtype=float)
        ax = np.abs(x)
        t = np.clip((ax - lo) / (2.0 * b), 0.0, 1.0)
        return np.where(ax <= lo, 1.0, np.where(ax >= hi, 0.0, 1.0 - t))

    return Nonlinearity(
        name="ramp",
        fn=fn,
        deriv_fn=deriv_fn,
        growth=(0.0, s),
        deriv_growth=(0.0, 1.0),
        params={"s": s, "blend": b},
    )


_REGISTRY: dict[str, Callable[..., Nonlinearity]] = {
    "identity": make_identity,
    "tanh": make_tanh,
    "scaled_tanh": make_scaled_tanh,
    "linear": make_linear,
    "ramp": make_ramp,
}


def available_families() -> tuple[str, ...]:
    return tuple(sorted(_REGISTRY))


def get_nonlinearity(family: str, **params) -> Nonlinearity:
    """Instantiate a built-in family by name with keyword parameters."""
    try:
        factory = _REGISTRY[family]
    except KeyError:
        raise ValueError(
            f"unknown nonlinearity family '{family}'; "
            f"available: {', '.join(available_families())}"
        ) from None
    return factory(**params)
