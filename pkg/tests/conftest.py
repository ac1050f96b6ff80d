import numpy as np
import pytest

from nonlocal_field import (
    Field,
    KernelSpec,
    Model,
    build_grid,
    build_kernel,
    make_identity,
    make_tanh,
)


@pytest.fixture(scope="session")
def unit_grid():
    return build_grid(1, [0.0, 1.0], 65)


@pytest.fixture(scope="session")
def sym_grid():
    return build_grid(1, [-1.0, 1.0], 65)


@pytest.fixture(scope="session")
def uniform_kernel(unit_grid):
    return build_kernel(KernelSpec.uniform(), unit_grid)


@pytest.fixture(scope="session")
def gaussian_kernel(sym_grid):
    return build_kernel(KernelSpec.gaussian(0.2), sym_grid)


@pytest.fixture(scope="session")
def tanh_identity_model(unit_grid, uniform_kernel):
    """Reference configuration: saturating response, unit row mass."""
    return Model(grid=unit_grid, kernel=uniform_kernel,
                 f=make_identity(), g=make_tanh(), beta=2.0, h=0.0)


@pytest.fixture(scope="session")
def gaussian_tanh_model(sym_grid, gaussian_kernel):
    """Same nonlinearities on a kernel with genuine boundary tails."""
    return Model(grid=sym_grid, kernel=gaussian_kernel,
                 f=make_identity(), g=make_tanh(), beta=2.0, h=0.0)


def random_field(grid, rng, amplitude=1.0):
    return Field(grid, amplitude * rng.uniform(-1.0, 1.0, grid.n_nodes))
