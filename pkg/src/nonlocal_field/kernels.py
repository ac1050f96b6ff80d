"""Symmetric interaction kernels and the associated integral operator.

The operator acts on fields that vanish outside the domain, but the kernel
itself is normalized over all of space.  The mass a row loses to the
exterior (``tail_mass``) is kept explicitly so compositions like K(f(u))
can account for the constant value f(0) the exterior contributes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AsymmetricKernelError,
    InvalidExponentError,
    KernelSignError,
)
from .grid import DomainGrid, Field, conjugate_exponent, require_same_grid

SYMMETRY_RTOL = 1e-8


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family plus parameters; total mass over R^N is 1 by construction."""

    family: str
    sigma: float | None = None    # gaussian width
    radius: float | None = None   # tophat radius
    matrix: np.ndarray | None = None

    def __post_init__(self):
        if self.family == "gaussian":
            if self.sigma is None or self.sigma <= 0:
                raise ValueError("gaussian kernel needs sigma > 0")
        elif self.family == "tophat":
            if self.radius is None or self.radius <= 0:
                raise ValueError("tophat kernel needs radius > 0")
        elif self.family == "uniform":
            pass
        elif self.family == "custom":
            if self.matrix is None:
                raise ValueError("custom kernel needs a matrix")
        else:
            raise ValueError(f"unknown kernel family '{self.family}'")

    @staticmethod
    def gaussian(sigma: float) -> "KernelSpec":
        return KernelSpec("gaussian", sigma=sigma)

    @staticmethod
    def tophat(radius: float) -> "KernelSpec":
        return KernelSpec("tophat", radius=radius)

    @staticmethod
    def uniform() -> "KernelSpec":
        return KernelSpec("uniform")

    @staticmethod
    def custom(matrix) -> "KernelSpec":
        return KernelSpec("custom", matrix=np.asarray(matrix, dtype=float))


@dataclass(eq=False)
class Kernel:
    """Discretized kernel: matrix J(x_i, x_j), row masses and exterior tails."""

    grid: DomainGrid
    matrix: np.ndarray
    row_mass: np.ndarray
    tail_mass: np.ndarray
    spec: KernelSpec | None = None
    _norm_cache: dict = field(default_factory=dict, repr=False)

    def norm(self, r: float) -> float:
        """sup over nodes of the L^r norm of a kernel row over the domain."""
        if r < 1:
            raise InvalidExponentError(f"kernel norm exponent must be >= 1, got {r}")
        key = float(r)
        if key not in self._norm_cache:
            if math.isinf(r):
                value = float(self.matrix.max())
            elif r == 1:
                value = float(self.row_mass.max())
            else:
                w = self.grid.weights
                value = float(((self.matrix**r) @ w).max() ** (1.0 / r))
            self._norm_cache[key] = value
        return self._norm_cache[key]


def build_kernel(spec: KernelSpec, grid: DomainGrid) -> Kernel:
    """Evaluate a kernel family on the grid and precompute its row masses.

    The matrix is symmetrized as (J + J^T)/2 after discretization so the
    bilinear form sum_ij w_i w_j J_ij u_i v_j is exactly self-adjoint, which
    the energy-functional identities rely on.  Tail mass is the analytic
    total mass 1 minus the quadrature row mass, floored at zero.
    """
    nodes = grid.nodes
    if spec.family == "uniform":
        matrix = np.full((grid.n_nodes, grid.n_nodes), 1.0 / grid.measure)
    elif spec.family == "gaussian":
        d2 = _pairwise_sq_dist(nodes)
        s2 = spec.sigma**2
        matrix = np.exp(-d2 / (2.0 * s2)) / (2.0 * math.pi * s2) ** (grid.dim / 2.0)
    elif spec.family == "tophat":
        d2 = _pairwise_sq_dist(nodes)
        if grid.dim == 1:
            vol = 2.0 * spec.radius
        else:
            vol = math.pi * spec.radius**2
        matrix = (d2 <= spec.radius**2).astype(float) / vol
    elif spec.family == "custom":
        matrix = np.array(spec.matrix, dtype=float)
        if matrix.shape != (grid.n_nodes, grid.n_nodes):
            raise ValueError(
                f"custom kernel is {matrix.shape}, grid has {grid.n_nodes} nodes"
            )
        peak = float(np.abs(matrix).max()) or 1.0
        defect = float(np.abs(matrix - matrix.T).max())
        if defect > SYMMETRY_RTOL * peak:
            raise AsymmetricKernelError(
                f"custom kernel symmetry defect {defect:.3e} exceeds "
                f"{SYMMETRY_RTOL:.0e} * max entry"
            )
        if matrix.min() < 0:
            raise KernelSignError("kernel entries must be nonnegative")
    else:  # pragma: no cover - guarded by KernelSpec
        raise ValueError(f"unknown kernel family '{spec.family}'")

    matrix = 0.5 * (matrix + matrix.T)
    row_mass = matrix @ grid.weights
    tail_mass = np.clip(1.0 - row_mass, 0.0, None)
    return Kernel(grid=grid, matrix=matrix, row_mass=row_mass,
                  tail_mass=tail_mass, spec=spec)


def _pairwise_sq_dist(nodes: np.ndarray) -> np.ndarray:
    diff = nodes[:, None, :] - nodes[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def apply_K_values(kernel: Kernel, values: np.ndarray,
                   exterior_value: float = 0.0) -> np.ndarray:
    out = kernel.matrix @ (kernel.grid.weights * values)
    if exterior_value != 0.0:
        out = out + exterior_value * kernel.tail_mass
    return out


def apply_K(kernel: Kernel, field: Field, exterior_value: float = 0.0) -> Field:
    """Integral operator: (Kv)_i = sum_j w_j J_ij v_j + exterior * tail_i.

    ``exterior_value`` is the constant the integrand takes outside the
    domain (f(0) when applying K to f(u), since u vanishes there).
    """
    require_same_grid(kernel.grid, field.grid)
    if not math.isfinite(exterior_value):
        raise ValueError("exterior_value must be finite")
    return Field(field.grid, apply_K_values(kernel, field.values, exterior_value),
                 field.time)


def kernel_norm(kernel: Kernel, r: float) -> float:
    """Operator norm functional ||J||_r, 1 <= r <= inf."""
    return kernel.norm(r)


@dataclass(frozen=True)
class InequalityCheck:
    name: str
    lhs: float
    rhs: float

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    def holds(self, tol: float = 1e-10) -> bool:
        return self.slack >= -tol


@dataclass(frozen=True)
class BoundKReport:
    """Both sides of the three operator-norm inequalities for one field.

    ``unit_contraction`` additionally records ||Ku||_p against the bare
    ||u||_p.  It is reported but kept out of the pass gate: the discrete
    row mass may exceed 1 by quadrature error (sharp-cutoff kernels), in
    which case only the ||J||_1-weighted bound is exact on the grid.
    """

    p: float
    q: float
    checks: tuple[InequalityCheck, ...]
    unit_contraction: InequalityCheck

    @property
    def min_slack(self) -> float:
        return min(c.slack for c in self.checks)

    def passed(self, tol: float = 1e-10) -> bool:
        return all(c.holds(tol) for c in self.checks)


def verify_boundK(kernel: Kernel, field: Field, p: float) -> BoundKReport:
    """Check |Ku| <= ||J||_q ||u||_p, ||Ku||_p <= ||J||_1 ||u||_p and
    ||Ku||_p <= ||J||_p ||u||_1 on the shared grid (exterior fixed to 0)."""
    require_same_grid(kernel.grid, field.grid)
    grid = kernel.grid
    q = conjugate_exponent(p)
    ku = apply_K_values(kernel, field.values, 0.0)

    sup_ku = float(np.max(np.abs(ku))) if ku.size else 0.0
    norm_u_p = grid.norm(field.values, p)
    norm_u_1 = grid.norm(field.values, 1)
    norm_ku_p = grid.norm(ku, p)

    checks = (
        InequalityCheck("pointwise_holder", sup_ku, kernel.norm(q) * norm_u_p),
        InequalityCheck("lp_contraction", norm_ku_p, kernel.norm(1) * norm_u_p),
        InequalityCheck("l1_smoothing", norm_ku_p, kernel.norm(p) * norm_u_1),
    )
    unit = InequalityCheck("lp_contraction_unit", norm_ku_p, norm_u_p)
    return BoundKReport(p=p, q=q, checks=checks, unit_contraction=unit)


def load_kernel_csv(path) -> np.ndarray:
    """Read a custom kernel matrix from CSV with header '# kernel n=<nodes>'."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header.startswith("# kernel n="):
            raise ValueError(
                f"{path}: expected header '# kernel n=<nodes>', got '{header}'"
            )
        n = int(header.split("=", 1)[1])
        matrix = np.loadtxt(fh, delimiter=",", ndmin=2)
    if matrix.shape != (n, n):
        raise ValueError(f"{path}: header says n={n}, data is {matrix.shape}")
    return matrix


def save_kernel_csv(path, matrix: np.ndarray) -> None:
    matrix = np.asarray(matrix, dtype=float)
    n = matrix.shape[0]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# kernel n={n}\n")
        for row in matrix:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
