"""Uniform box grids in one and two dimensions with trapezoidal quadrature.

All norms and integrals in the toolkit go through the weights stored here,
so discrete inequalities between operator norms and field norms hold exactly
(not just in the continuum limit).  Node ordering is lexicographic by axis
and summation uses numpy's pairwise reduction, which keeps repeated runs
bit-identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateDomainError, GridMismatchError, InvalidExponentError


def _trapezoid_weights(n: int, h: float) -> np.ndarray:
    w = np.full(n, h)
    w[0] = 0.5 * h
    w[-1] = 0.5 * h
    return w


@dataclass(frozen=True, eq=False)
class DomainGrid:
    """Discretized box domain: nodes, quadrature weights and total measure."""

    dim: int
    bounds: tuple[tuple[float, float], ...]
    shape: tuple[int, ...]
    nodes: np.ndarray      # (n_nodes, dim)
    weights: np.ndarray    # (n_nodes,)
    measure: float

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(
            (hi - lo) / (n - 1) for (lo, hi), n in zip(self.bounds, self.shape)
        )

    def integrate(self, values: np.ndarray) -> float:
        return float(np.dot(self.weights, values))

    def norm(self, values: np.ndarray, p: float) -> float:
        """Discrete L^p norm (sum w_i |u_i|^p)^(1/p); p = inf gives max |u_i|."""
        if p < 1:
            raise InvalidExponentError(f"norm exponent must satisfy p >= 1, got {p}")
        if math.isinf(p):
            return float(np.max(np.abs(values))) if values.size else 0.0
        if p == 1:
            return float(np.dot(self.weights, np.abs(values)))
        if p == 2:
            return float(math.sqrt(np.dot(self.weights, values * values)))
        return float(np.dot(self.weights, np.abs(values) ** p) ** (1.0 / p))


@dataclass(eq=False)
class Field:
    """State values on a grid at one instant (zero outside the domain)."""

    grid: DomainGrid
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.n_nodes,):
            raise GridMismatchError(
                f"field has {self.values.shape} values for a grid of "
                f"{self.grid.n_nodes} nodes"
            )

    def copy(self) -> "Field":
        return Field(self.grid, self.values.copy(), self.time)


def build_grid(dim: int, bounds, resolution) -> DomainGrid:
    """Build a uniform tensor-product grid with trapezoidal weights.

    ``bounds`` is ``(lo, hi)`` in 1D or a pair of intervals in 2D;
    ``resolution`` is the node count per axis (scalar or per-axis, >= 2).
    """
    if dim not in (1, 2):
        raise ValueError(f"dim must be 1 or 2, got {dim}")
    axis_bounds = _normalize_bounds(dim, bounds)
    axis_res = _normalize_resolution(dim, resolution)

    axes = []
    axis_weights = []
    measure = 1.0
    for (lo, hi), n in zip(axis_bounds, axis_res):
        if not hi > lo:
            raise DegenerateDomainError(f"bounds [{lo}, {hi}] enclose no volume")
        h = (hi - lo) / (n - 1)
        axes.append(np.linspace(lo, hi, n))
        axis_weights.append(_trapezoid_weights(n, h))
        measure *= hi - lo

    if dim == 1:
        nodes = axes[0][:, None]
        weights = axis_weights[0]
    else:
        xx, yy = np.meshgrid(axes[0], axes[1], indexing="ij")
        nodes = np.column_stack([xx.ravel(), yy.ravel()])
        weights = np.outer(axis_weights[0], axis_weights[1]).ravel()

    return DomainGrid(
        dim=dim,
        bounds=tuple(axis_bounds),
        shape=tuple(axis_res),
        nodes=nodes,
        weights=weights,
        measure=measure,
    )


def _normalize_bounds(dim, bounds):
    seq = list(bounds)
    if dim == 1 and len(seq) == 2 and np.isscalar(seq[0]):
        seq = [seq]
    if len(seq) != dim:
        raise ValueError(f"expected {dim} bound pairs, got {len(seq)}")
    out = []
    for pair in seq:
        lo, hi = (float(v) for v in pair)
        out.append((lo, hi))
    return out


def _normalize_resolution(dim, resolution):
    if np.isscalar(resolution):
        res = [int(resolution)] * dim
    else:
        res = [int(r) for r in resolution]
    if len(res) != dim:
        raise ValueError(f"expected {dim} resolutions, got {len(res)}")
    for r in res:
        if r < 2:
            raise ValueError(f"resolution must be >= 2 per axis, got {r}")
    return res


def lp_norm(field: Field, p: float) -> float:
    """Discrete L^p norm of a field, p in [1, inf]."""
    return field.grid.norm(field.values, p)


def integrate_field(field: Field) -> float:
    """Quadrature integral of the field over the domain."""
    return field.grid.integrate(field.values)


def require_same_grid(a: DomainGrid, b: DomainGrid) -> None:
    if a is not b:
        raise GridMismatchError("operands live on different grids")


def conjugate_exponent(p: float) -> float:
    """q with 1/p + 1/q = 1; pairs L^p with L^q in the operator bounds."""
    if p < 1:
        raise InvalidExponentError(f"exponent must satisfy p >= 1, got {p}")
    if p == 1:
        return math.inf
    if math.isinf(p):
        return 1.0
    return p / (p - 1.0)
