"""Run orchestration and on-disk artifacts for the command-line front end.

Trajectories go to CSV (one column per node, header row of node
coordinates), verdicts and manifests to JSON.  Float formatting uses
``repr`` (shortest round-trip), so identical runs produce byte-identical
files; the manifest's wall-clock entry is the one deliberately
non-reproducible value.
"""

from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .dynamics import Trajectory, integrate
from .errors import DivergenceError, NonConvergenceError, PotentialDomainError
from .grid import DomainGrid
from .lyapunov import build_potential_table, dissipation_I, lyapunov_F
from .scenario import Scenario, build_initial_field, build_model, scenario_to_mapping
from .suites import run_suite

THREADS_ENV = "NONLOCAL_FIELD_THREADS"
TOOLKIT_VERSION = "0.1.0"


def _fmt(value: float) -> str:
    return repr(float(value))


def _node_labels(grid: DomainGrid) -> list[str]:
    if grid.dim == 1:
        return [f"x={_fmt(x)}" for x in grid.nodes[:, 0]]
    return [f"x={_fmt(x)};y={_fmt(y)}" for x, y in grid.nodes]


def write_trajectory_csv(path: str, trajectory: Trajectory) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t," + ",".join(_node_labels(trajectory.grid)) + "\n")
        for k in range(trajectory.n_times):
            row = [_fmt(trajectory.times[k])]
            row.extend(_fmt(v) for v in trajectory.values[k])
            fh.write(",".join(row) + "\n")


def write_norms_csv(path: str, trajectory: Trajectory) -> None:
    columns = ["L1", "L2", "Linf"]
    for extra in ("F", "I"):
        if extra in trajectory.records:
            columns.append(extra)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t," + ",".join(columns) + "\n")
        for k in range(trajectory.n_times):
            row = [_fmt(trajectory.times[k])]
            row.extend(_fmt(trajectory.records[c][k]) for c in columns)
            fh.write(",".join(row) + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, float) and math.isnan(obj):
        return None
    return obj


def write_json(path: str, obj) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_jsonable(obj), fh, indent=2)
        fh.write("\n")


def _prepare_out_dir(scenario: Scenario, output_dir: str | None) -> str:
    out = output_dir if output_dir else scenario.output.directory
    os.makedirs(out, exist_ok=True)
    return out


def _lyapunov_recorder(scenario: Scenario, model):
    """Per-step energy/dissipation recorders, or None if the model does not
    satisfy the energy-functional hypotheses."""
    if "lyapunov" not in scenario.analysis.suites:
        return None
    if model.g.range_bound is None or model.beta <= 0:
        return None
    if float(np.max(np.abs(model.kernel.row_mass - 1.0))) > 1e-6:
        return None
    table = build_potential_table(model.f, model.g, model.beta, model.h)

    def energy(fld):
        try:
            return lyapunov_F(model, table, fld)
        except PotentialDomainError:
            return math.nan

    def dissipation(fld):
        try:
            return dissipation_I(model, fld)
        except PotentialDomainError:
            return math.nan

    return {"F": energy, "I": dissipation}


def run_simulate(scenario: Scenario, output_dir: str | None = None):
    """Integrate the configured run and persist trajectory, norms, manifest.

    Returns (manifest, exit_code); exit code 2 flags divergence.
    """
    started = time.perf_counter()
    out = _prepare_out_dir(scenario, output_dir)
    model = build_model(scenario)
    u0 = build_initial_field(scenario, model.grid)
    recorder = _lyapunov_recorder(scenario, model)

    status = "ok"
    failure_time = None
    trajectory = None
    try:
        trajectory = integrate(model, u0, scenario.run.t_end, scenario.run.dt,
                               scheme=scenario.run.scheme, recorder=recorder)
    except DivergenceError as exc:
        status = "diverged"
        failure_time = exc.time

    outputs = []
    summary = {}
    if trajectory is not None and "csv" in scenario.output.formats:
        traj_path = os.path.join(out, "trajectory.csv")
        norms_path = os.path.join(out, "norms.csv")
        write_trajectory_csv(traj_path, trajectory)
        write_norms_csv(norms_path, trajectory)
        outputs.extend(["trajectory.csv", "norms.csv"])
    if trajectory is not None:
        summary = {
            "final_time": float(trajectory.times[-1]),
            "final_L2": float(trajectory.records["L2"][-1]),
            "final_Linf": float(trajectory.records["Linf"][-1]),
        }

    manifest = {
        "toolkit_version": TOOLKIT_VERSION,
        "command": "simulate",
        "scenario": scenario_to_mapping(scenario),
        "status": status,
        "failure_time": failure_time,
        "summary": summary,
        "outputs": outputs,
        "wall_clock_seconds": time.perf_counter() - started,
    }
    write_json(os.path.join(out, "run_manifest.json"), manifest)
    return manifest, (0 if status == "ok" else 2)


def _worker_count(n_tasks: int) -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return 1
    try:
        workers = int(raw)
    except ValueError:
        return 1
    return max(1, min(workers, n_tasks))


def run_verify(scenario: Scenario, output_dir: str | None = None):
    """Run the requested suites (concurrently if NONLOCAL_FIELD_THREADS > 1)
    and persist one verdict JSON per suite plus the manifest.

    Returns (manifest, exit_code); exit code 3 flags a failed suite.
    """
    started = time.perf_counter()
    out = _prepare_out_dir(scenario, output_dir)
    model = build_model(scenario)

    names = list(dict.fromkeys(scenario.analysis.suites))
    workers = _worker_count(len(names))
    if workers > 1 and len(names) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            verdicts = list(pool.map(
                lambda name: run_suite(name, scenario, model), names))
    else:
        verdicts = [run_suite(name, scenario, model) for name in names]

    outputs = []
    for verdict in verdicts:
        path = f"verdict_{verdict.name}.json"
        write_json(os.path.join(out, path), verdict.to_mapping())
        outputs.append(path)

    any_failed = any(v.failed for v in verdicts)
    manifest = {
        "toolkit_version": TOOLKIT_VERSION,
        "command": "verify",
        "scenario": scenario_to_mapping(scenario),
        "status": "fail" if any_failed else "pass",
        "suites": [v.to_mapping() for v in verdicts],
        "outputs": outputs,
        "wall_clock_seconds": time.perf_counter() - started,
    }
    write_json(os.path.join(out, "run_manifest.json"), manifest)
    return manifest, (3 if any_failed else 0)


def run_equilibria(scenario: Scenario, output_dir: str | None = None):
    """Solve for an equilibrium from the scenario's initial condition."""
    from .lyapunov import solve_equilibrium_fixed_point

    started = time.perf_counter()
    out = _prepare_out_dir(scenario, output_dir)
    model = build_model(scenario)
    u0 = build_initial_field(scenario, model.grid)

    status = "ok"
    payload = {}
    code = 0
    try:
        result = solve_equilibrium_fixed_point(model, u0, damping=1.0,
                                               tol=1e-12, max_iter=5000)
        state = result.state.values
        payload = {
            "residual": result.residual,
            "iterations": result.iterations,
            "dissipation": result.dissipation,
            "state_min": float(state.min()),
            "state_max": float(state.max()),
            "state_mean": float(np.mean(state)),
        }
        with open(os.path.join(out, "equilibrium.csv"), "w",
                  encoding="utf-8", newline="\n") as fh:
            fh.write("node," + ",".join(_node_labels(model.grid)) + "\n")
            fh.write("u," + ",".join(_fmt(v) for v in state) + "\n")
    except NonConvergenceError as exc:
        status = "non-convergence"
        payload = {"residual": exc.residual}
        code = 2

    manifest = {
        "toolkit_version": TOOLKIT_VERSION,
        "command": "equilibria",
        "scenario": scenario_to_mapping(scenario),
        "status": status,
        "equilibrium": payload,
        "outputs": ["equilibrium.csv"] if status == "ok" else [],
        "wall_clock_seconds": time.perf_counter() - started,
    }
    write_json(os.path.join(out, "equilibrium.json"), manifest)
    return manifest, code


def run_kernel_info(scenario: Scenario, output_dir: str | None = None):
    """Summarize the discretized kernel: norms, row masses, tails."""
    started = time.perf_counter()
    out = _prepare_out_dir(scenario, output_dir)
    model = build_model(scenario)
    kernel = model.kernel
    info = {
        "toolkit_version": TOOLKIT_VERSION,
        "command": "kernel-info",
        "family": scenario.model.kernel,
        "nodes": model.grid.n_nodes,
        "measure": model.grid.measure,
        "norm_1": kernel.norm(1),
        "norm_2": kernel.norm(2),
        "norm_inf": kernel.norm(math.inf),
        "row_mass_min": float(kernel.row_mass.min()),
        "row_mass_max": float(kernel.row_mass.max()),
        "tail_mass_max": float(kernel.tail_mass.max()),
        "symmetry_defect": float(np.abs(kernel.matrix - kernel.matrix.T).max()),
        "wall_clock_seconds": time.perf_counter() - started,
    }
    write_json(os.path.join(out, "kernel_info.json"), info)
    return info, 0
