import math
import os

import numpy as np
import pytest

from nonlocal_field import (
    Field,
    KernelSpec,
    Model,
    apply_K,
    build_grid,
    build_kernel,
    compute_bounds,
    check_absorbing,
    integrate,
    make_identity,
    make_scaled_tanh,
    parse_scenario,
    verify_boundK,
)
from nonlocal_field.runio import run_simulate, run_verify

SCENARIO_DIR = os.path.join(os.path.dirname(__file__), "..", "scenarios")


@pytest.fixture(scope="module")
def grid_2d():
    return build_grid(2, [[0.0, 1.0], [0.0, 1.0]], [17, 17])


def test_gaussian_2d_tail_at_center(grid_2d):
    kernel = build_kernel(KernelSpec.gaussian(0.1), grid_2d)
    center = int(np.argmin(np.linalg.norm(grid_2d.nodes - 0.5, axis=1)))
    assert kernel.tail_mass[center] <= 1e-5
    corner_tail = kernel.tail_mass[0]
    # three quadrants of the mass fall outside at a corner
    assert corner_tail == pytest.approx(0.75, abs=1e-3)


def test_tophat_2d_normalization(grid_2d):
    kernel = build_kernel(KernelSpec.tophat(0.3), grid_2d)
    assert kernel.matrix.max() == pytest.approx(1.0 / (math.pi * 0.3**2))
    u = Field(grid_2d, np.ones(grid_2d.n_nodes))
    out = apply_K(kernel, u, exterior_value=1.0)
    assert np.abs(out.values - 1.0).max() <= 0.12   # O(h) cutoff quadrature


def test_boundK_2d_random_fields(grid_2d):
    kernel = build_kernel(KernelSpec.gaussian(0.2), grid_2d)
    rng = np.random.default_rng(211)
    for _ in range(20):
        u = Field(grid_2d, rng.standard_normal(grid_2d.n_nodes))
        for p in (1.0, 2.0, math.inf):
            assert verify_boundK(kernel, u, p).min_slack >= -1e-10


def test_2d_flow_enters_absorbing_ball(grid_2d):
    kernel = build_kernel(KernelSpec.gaussian(0.2), grid_2d)
    model = Model(grid=grid_2d, kernel=kernel, f=make_identity(),
                  g=make_scaled_tanh(rho=1.5, tau=1.0), beta=1.0, h=0.0)
    report = compute_bounds(model, p=2.0, sigma=1.0)
    rng = np.random.default_rng(223)
    raw = rng.uniform(-1.0, 1.0, grid_2d.n_nodes)
    raw *= 5.0 * report.R / grid_2d.norm(raw, 2)
    traj = integrate(model, Field(grid_2d, raw), 8.0, 0.02)
    verdict = check_absorbing(traj, report)
    assert verdict.entered and verdict.passed


def test_two_dimensional_scenario_end_to_end(tmp_path):
    scenario = parse_scenario(os.path.join(SCENARIO_DIR, "two_dimensional.toml"))
    manifest, code = run_simulate(scenario, str(tmp_path / "sim"))
    assert code == 0
    assert manifest["summary"]["final_Linf"] <= 1.5
    header = (tmp_path / "sim" / "trajectory.csv").read_text().splitlines()[0]
    assert header.count(";y=") == scenario.model.resolution[0] * \
        scenario.model.resolution[1]

    manifest, code = run_verify(scenario, str(tmp_path / "ver"))
    assert code == 0
    statuses = {v["suite"]: v["status"] for v in manifest["suites"]}
    assert statuses == {"boundK": "pass", "absorbing": "pass"}


def test_gaussian_scenario_verifies(tmp_path):
    scenario = parse_scenario(os.path.join(SCENARIO_DIR, "gaussian_field.toml"))
    manifest, code = run_verify(scenario, str(tmp_path / "ver"))
    assert code == 0
    statuses = {v["suite"]: v["status"] for v in manifest["suites"]}
    assert statuses == {"boundK": "pass", "absorbing": "pass",
                        "comparison": "pass"}
