import json
import math
import os

import numpy as np
import pytest

from nonlocal_field import (
    build_initial_field,
    build_model,
    emit_scenario,
    parse_scenario,
    save_kernel_csv,
)
from nonlocal_field.cli import main
from nonlocal_field.errors import ScenarioError, ScenarioValidationError
from nonlocal_field.runio import run_simulate, run_verify
from nonlocal_field.scenario import parse_scenario_text

REPO_SCENARIOS = os.path.join(os.path.dirname(__file__), "..", "scenarios")
M_STAR_BETA2 = 0.9575040240772688


def test_minimal_scenario_defaults(tmp_path):
    path = tmp_path / "min.toml"
    path.write_text("[model]\nbeta = 0.5\n")
    sc = parse_scenario(path)
    assert sc.run.dt == 0.01
    assert sc.run.scheme == "etd1"
    assert sc.analysis.p == 2.0
    assert sc.analysis.sigma == 1.0
    assert sc.analysis.suites == ("boundK",)
    assert sc.model.g == "tanh"


def test_unknown_key_named():
    with pytest.raises(ScenarioError, match="model.fooo"):
        parse_scenario_text("[model]\nfooo = 1\n")


def test_unknown_section_rejected():
    with pytest.raises(ScenarioError, match="plotting"):
        parse_scenario_text("[plotting]\nstyle = 'x'\n")


def test_malformed_toml(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text("[model\nbeta = ")
    with pytest.raises(ScenarioError):
        parse_scenario(path)


def test_missing_file():
    with pytest.raises(ScenarioError):
        parse_scenario("/nonexistent/path.toml")


def test_lyapunov_requires_bounded_g():
    text = "[model]\ng = 'identity'\n[analysis]\nsuites = ['lyapunov']\n"
    with pytest.raises(ScenarioValidationError, match="unbounded"):
        parse_scenario_text(text)


def test_random_initial_requires_seed():
    text = "[model]\n[run]\ninitial = 'random'\n"
    with pytest.raises(ScenarioValidationError, match="seed"):
        parse_scenario_text(text)


def test_unknown_suite_rejected():
    text = "[analysis]\nsuites = ['everything']\n"
    with pytest.raises(ScenarioValidationError, match="everything"):
        parse_scenario_text(text)


def test_unknown_nonlinearity_family():
    with pytest.raises(ScenarioValidationError, match="sigmoid"):
        parse_scenario_text("[model]\ng = 'sigmoid'\n")


def test_roundtrip_reference():
    sc = parse_scenario(os.path.join(REPO_SCENARIOS, "reference.toml"))
    again = parse_scenario_text(emit_scenario(sc))
    assert again == sc


def test_roundtrip_two_dimensional():
    sc = parse_scenario(os.path.join(REPO_SCENARIOS, "two_dimensional.toml"))
    again = parse_scenario_text(emit_scenario(sc))
    assert again == sc
    assert sc.model.g_params == (("rho", 1.5), ("tau", 1.0))


def test_expression_initial():
    sc = parse_scenario_text(
        "[model]\n[run]\ninitial = 'expression'\nexpression = '0.5*cos(pi*x)'\n")
    model = build_model(sc)
    u0 = build_initial_field(sc, model.grid)
    x = model.grid.nodes[:, 0]
    assert np.allclose(u0.values, 0.5 * np.cos(math.pi * x))


def test_random_initial_deterministic():
    text = "[model]\n[run]\ninitial = 'random'\nseed = 5\namplitude = 0.3\n"
    sc = parse_scenario_text(text)
    model = build_model(sc)
    a = build_initial_field(sc, model.grid).values
    b = build_initial_field(sc, model.grid).values
    assert np.array_equal(a, b)
    assert np.abs(a).max() <= 0.3


def test_custom_kernel_scenario(tmp_path):
    n = 17
    rng = np.random.default_rng(13)
    base = rng.uniform(0.5, 1.5, (n, n))
    save_kernel_csv(tmp_path / "J.csv", 0.5 * (base + base.T))
    path = tmp_path / "sc.toml"
    path.write_text(
        "[model]\nresolution = 17\nkernel = 'custom'\nkernel_csv = 'J.csv'\n")
    sc = parse_scenario(path)
    model = build_model(sc)
    assert model.kernel.matrix.shape == (n, n)


def test_simulate_equilibrium_rows_identical(tmp_path):
    # land on the exact floating-point fixed point of the discrete update
    dt = 0.1
    lam = M_STAR_BETA2
    for _ in range(200):
        nxt = math.exp(-dt) * lam - math.expm1(-dt) * math.tanh(2.0 * lam)
        if nxt == lam:
            break
        lam = nxt
    path = tmp_path / "eq.toml"
    path.write_text(
        "[model]\nbeta = 2.0\n"
        "[run]\nt_end = 0.5\ndt = 0.1\ninitial = 'constant'\n"
        f"value = {lam!r}\n"
        f"[output]\ndirectory = '{tmp_path}/out'\n"
    )
    code = main(["simulate", str(path)])
    assert code == 0
    lines = (tmp_path / "out" / "trajectory.csv").read_text().splitlines()
    states = [line.split(",", 1)[1] for line in lines[1:]]
    assert len(set(states)) == 1


def test_simulate_deterministic_outputs(tmp_path):
    sc = parse_scenario(os.path.join(REPO_SCENARIOS, "reference.toml"))
    sc = sc.__class__(model=sc.model,
                      run=sc.run.__class__(t_end=1.0, dt=0.01,
                                           initial="random", seed=42,
                                           amplitude=0.5),
                      analysis=sc.analysis, output=sc.output)
    m1, c1 = run_simulate(sc, str(tmp_path / "a"))
    m2, c2 = run_simulate(sc, str(tmp_path / "b"))
    assert c1 == c2 == 0
    for name in ("trajectory.csv", "norms.csv"):
        assert (tmp_path / "a" / name).read_bytes() == \
            (tmp_path / "b" / name).read_bytes()


def test_simulate_records_energy_columns(tmp_path):
    sc = parse_scenario(os.path.join(REPO_SCENARIOS, "reference.toml"))
    sc = sc.__class__(model=sc.model,
                      run=sc.run.__class__(t_end=0.2, dt=0.02,
                                           initial="constant", value=0.3),
                      analysis=sc.analysis, output=sc.output)
    run_simulate(sc, str(tmp_path / "o"))
    header = (tmp_path / "o" / "norms.csv").read_text().splitlines()[0]
    assert header == "t,L1,L2,Linf,F,I"


def test_reference_simulate_final_row_matches_scalar_root(tmp_path):
    sc = parse_scenario(os.path.join(REPO_SCENARIOS, "reference.toml"))
    manifest, code = run_simulate(sc, str(tmp_path / "out"))
    assert code == 0
    last = (tmp_path / "out" / "trajectory.csv").read_text().splitlines()[-1]
    values = np.array([float(v) for v in last.split(",")[1:]])
    assert np.abs(np.abs(values) - M_STAR_BETA2).max() <= 1e-6


def test_verify_boundk_alone(tmp_path):
    path = tmp_path / "b.toml"
    path.write_text(
        "[model]\nkernel = 'gaussian'\nsigma = 0.15\n"
        "[analysis]\nsuites = ['boundK']\n"
        f"[output]\ndirectory = '{tmp_path}/out'\n")
    code = main(["verify", str(path)])
    assert code == 0
    verdict = json.loads((tmp_path / "out" / "verdict_boundK.json").read_text())
    assert verdict["status"] == "pass"
    assert verdict["details"]["min_slack"] >= -1e-10


def test_verify_absorbing_skipped_on_hypothesis_violation(tmp_path):
    path = tmp_path / "skip.toml"
    path.write_text(
        "[model]\nf = 'identity'\ng = 'identity'\nbeta = 1.0\n"
        "[analysis]\nsuites = ['absorbing']\n"
        f"[output]\ndirectory = '{tmp_path}/out'\n")
    code = main(["verify", str(path)])
    assert code == 0
    verdict = json.loads(
        (tmp_path / "out" / "verdict_absorbing.json").read_text())
    assert verdict["status"] == "skipped"
    assert "k1*beta*c1" in verdict["reason"]


def test_verify_lyapunov_skipped_on_boundary_tails(tmp_path):
    # gaussian kernels lose row mass near the boundary; the energy
    # identity's hypotheses fail, so the suite is skipped, not failed
    path = tmp_path / "tails.toml"
    path.write_text(
        "[model]\nkernel = 'gaussian'\nsigma = 0.2\nbeta = 2.0\n"
        "[run]\nt_end = 1.0\ninitial = 'random'\nseed = 5\n"
        "[analysis]\nsuites = ['lyapunov']\n"
        f"[output]\ndirectory = '{tmp_path}/out'\n")
    code = main(["verify", str(path)])
    assert code == 0
    verdict = json.loads((tmp_path / "out" / "verdict_lyapunov.json").read_text())
    assert verdict["status"] == "skipped"
    assert "row mass" in verdict["reason"]


def test_verify_lyapunov_skipped_without_coupling(tmp_path):
    path = tmp_path / "nobeta.toml"
    path.write_text(
        "[model]\nbeta = 0.0\n"
        "[run]\nt_end = 1.0\ninitial = 'constant'\nvalue = 0.1\n"
        "[analysis]\nsuites = ['lyapunov']\n"
        f"[output]\ndirectory = '{tmp_path}/out'\n")
    code = main(["verify", str(path)])
    assert code == 0
    verdict = json.loads((tmp_path / "out" / "verdict_lyapunov.json").read_text())
    assert verdict["status"] == "skipped"
    assert "beta" in verdict["reason"]


def test_verify_failure_exit_code(tmp_path):
    # horizon too short to reach the absorbing ball: honest failure, exit 3
    path = tmp_path / "fail.toml"
    path.write_text(
        "[model]\nbeta = 2.0\n"
        "[run]\nt_end = 0.05\ndt = 0.01\ninitial = 'random'\nseed = 3\n"
        "[analysis]\nsuites = ['absorbing']\n"
        f"[output]\ndirectory = '{tmp_path}/out'\n")
    code = main(["verify", str(path)])
    assert code == 3
    manifest = json.loads((tmp_path / "out" / "run_manifest.json").read_text())
    assert manifest["status"] == "fail"


def test_verify_threads_env_matches_serial(tmp_path, monkeypatch):
    sc = parse_scenario(os.path.join(REPO_SCENARIOS, "reference.toml"))
    sc = sc.__class__(model=sc.model,
                      run=sc.run.__class__(t_end=2.0, dt=0.02,
                                           initial="random", seed=42,
                                           amplitude=0.5),
                      analysis=sc.analysis.__class__(
                          suites=("boundK", "equilibria"), p=2.0, sigma=1.0),
                      output=sc.output)
    run_verify(sc, str(tmp_path / "serial"))
    monkeypatch.setenv("NONLOCAL_FIELD_THREADS", "2")
    run_verify(sc, str(tmp_path / "threaded"))
    for name in ("verdict_boundK.json", "verdict_equilibria.json"):
        assert (tmp_path / "serial" / name).read_bytes() == \
            (tmp_path / "threaded" / name).read_bytes()


def test_simulate_divergence_exit_code(tmp_path):
    path = tmp_path / "boom.toml"
    path.write_text(
        "[model]\ng = 'linear'\ng_params = {a = 100.0}\nbeta = 1.0\n"
        "[run]\nt_end = 200.0\ndt = 0.5\ninitial = 'constant'\nvalue = 1.0\n"
        f"[output]\ndirectory = '{tmp_path}/out'\n")
    with np.errstate(over="ignore", invalid="ignore"):
        code = main(["simulate", str(path)])
    assert code == 2
    manifest = json.loads((tmp_path / "out" / "run_manifest.json").read_text())
    assert manifest["status"] == "diverged"
    assert manifest["failure_time"] > 0


def test_equilibria_command(tmp_path):
    path = tmp_path / "eq.toml"
    path.write_text(
        "[model]\nbeta = 2.0\n"
        "[run]\ninitial = 'constant'\nvalue = 0.1\n"
        f"[output]\ndirectory = '{tmp_path}/out'\n")
    code = main(["equilibria", str(path)])
    assert code == 0
    payload = json.loads((tmp_path / "out" / "equilibrium.json").read_text())
    assert payload["equilibrium"]["residual"] <= 1e-12
    assert payload["equilibrium"]["state_mean"] == pytest.approx(
        M_STAR_BETA2, abs=1e-10)


def test_kernel_info_command(tmp_path):
    path = tmp_path / "k.toml"
    path.write_text(
        "[model]\nkernel = 'gaussian'\nsigma = 0.1\nresolution = 129\n"
        f"[output]\ndirectory = '{tmp_path}/out'\n")
    code = main(["kernel-info", str(path)])
    assert code == 0
    info = json.loads((tmp_path / "out" / "kernel_info.json").read_text())
    assert info["norm_1"] <= 1.0 + 1e-6
    assert info["symmetry_defect"] == 0.0
    assert info["tail_mass_max"] == pytest.approx(0.5, abs=1e-5)


def test_cli_usage_and_parse_errors(tmp_path):
    assert main(["simulate", "/does/not/exist.toml"]) == 1
    assert main(["frobnicate", "x"]) == 1
    bad = tmp_path / "bad.toml"
    bad.write_text("[model]\nfooo = 3\n")
    assert main(["verify", str(bad)]) == 1
