"""Scenario files: TOML configuration for models, runs and analysis suites.

A scenario has four sections (model, run, analysis, output); unknown keys
are rejected by name so typos fail loudly.  Parsing fills documented
defaults, normalizes shapes, and validates every cross-field requirement
that can be decided before building the model (nonlinearity families
exist, random initial data carries a seed, the energy suite only runs
with a saturating response, ...).
"""

from __future__ import annotations

import math
import os
from dataclasses import asdict, dataclass

import numpy as np

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover - environment dependent
    import tomli as tomllib

from .dynamics import STEPPERS, Model
from .errors import ScenarioError, ScenarioValidationError
from .grid import DomainGrid, Field, build_grid
from .kernels import KernelSpec, build_kernel, load_kernel_csv
from .nonlinearity import available_families, get_nonlinearity

SUITE_NAMES = ("boundK", "absorbing", "comparison", "lyapunov", "equilibria")

_MODEL_KEYS = {"dim", "bounds", "resolution", "kernel", "sigma", "radius",
               "kernel_csv", "f", "f_params", "g", "g_params", "beta", "h"}
_RUN_KEYS = {"t_end", "dt", "scheme", "initial", "value", "amplitude",
             "seed", "expression"}
_ANALYSIS_KEYS = {"suites", "p", "sigma"}
_OUTPUT_KEYS = {"directory", "formats"}


@dataclass(frozen=True)
class ModelSection:
    dim: int = 1
    bounds: tuple[tuple[float, float], ...] = ((0.0, 1.0),)
    resolution: tuple[int, ...] = (65,)
    kernel: str = "uniform"
    sigma: float | None = None
    radius: float | None = None
    kernel_csv: str | None = None
    f: str = "identity"
    f_params: tuple[tuple[str, float], ...] = ()
    g: str = "tanh"
    g_params: tuple[tuple[str, float], ...] = ()
    beta: float = 1.0
    h: float = 0.0


@dataclass(frozen=True)
class RunSection:
    t_end: float = 10.0
    dt: float = 0.01
    scheme: str = "etd1"
    initial: str = "constant"
    value: float = 0.1
    amplitude: float = 1.0
    seed: int | None = None
    expression: str | None = None


@dataclass(frozen=True)
class AnalysisSection:
    suites: tuple[str, ...] = ("boundK",)
    p: float = 2.0
    sigma: float = 1.0


@dataclass(frozen=True)
class OutputSection:
    directory: str = "out"
    formats: tuple[str, ...] = ("csv", "json")


@dataclass(frozen=True)
class Scenario:
    model: ModelSection = ModelSection()
    run: RunSection = RunSection()
    analysis: AnalysisSection = AnalysisSection()
    output: OutputSection = OutputSection()


def parse_scenario(path) -> Scenario:
    """Read, normalize and validate a scenario file."""
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise ScenarioError(f"scenario file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioError(f"{path}: malformed TOML: {exc}") from None
    return _scenario_from_mapping(raw, base_dir=os.path.dirname(
        os.path.abspath(path)))


def parse_scenario_text(text: str, base_dir: str = ".") -> Scenario:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioError(f"malformed TOML: {exc}") from None
    return _scenario_from_mapping(raw, base_dir=base_dir)


def _check_keys(section: str, mapping: dict, allowed: set) -> None:
    for key in mapping:
        if key not in allowed:
            raise ScenarioError(f"unknown key '{section}.{key}'")


def _params_tuple(section: str, key: str, value) -> tuple[tuple[str, float], ...]:
    if not isinstance(value, dict):
        raise ScenarioError(f"'{section}.{key}' must be a table of numbers")
    return tuple(sorted((str(k), float(v)) for k, v in value.items()))


def _scenario_from_mapping(raw: dict, base_dir: str) -> Scenario:
    known_sections = {"model", "run", "analysis", "output"}
    for key in raw:
        if key not in known_sections:
            raise ScenarioError(f"unknown section '{key}'")

    model_raw = dict(raw.get("model", {}))
    _check_keys("model", model_raw, _MODEL_KEYS)
    run_raw = dict(raw.get("run", {}))
    _check_keys("run", run_raw, _RUN_KEYS)
    analysis_raw = dict(raw.get("analysis", {}))
    _check_keys("analysis", analysis_raw, _ANALYSIS_KEYS)
    output_raw = dict(raw.get("output", {}))
    _check_keys("output", output_raw, _OUTPUT_KEYS)

    defaults = ModelSection()
    dim = int(model_raw.get("dim", defaults.dim))
    bounds = _normalize_bounds(dim, model_raw.get("bounds", defaults.bounds))
    resolution = _normalize_resolution(
        dim, model_raw.get("resolution", defaults.resolution))
    kernel_csv = model_raw.get("kernel_csv")
    if kernel_csv is not None and not os.path.isabs(kernel_csv):
        kernel_csv = os.path.join(base_dir, kernel_csv)

    model = ModelSection(
        dim=dim,
        bounds=bounds,
        resolution=resolution,
        kernel=str(model_raw.get("kernel", defaults.kernel)),
        sigma=_opt_float(model_raw.get("sigma")),
        radius=_opt_float(model_raw.get("radius")),
        kernel_csv=kernel_csv,
        f=str(model_raw.get("f", defaults.f)),
        f_params=_params_tuple("model", "f_params",
                               model_raw.get("f_params", {})),
        g=str(model_raw.get("g", defaults.g)),
        g_params=_params_tuple("model", "g_params",
                               model_raw.get("g_params", {})),
        beta=float(model_raw.get("beta", defaults.beta)),
        h=float(model_raw.get("h", defaults.h)),
    )

    run_defaults = RunSection()
    seed = run_raw.get("seed")
    run = RunSection(
        t_end=float(run_raw.get("t_end", run_defaults.t_end)),
        dt=float(run_raw.get("dt", run_defaults.dt)),
        scheme=str(run_raw.get("scheme", run_defaults.scheme)),
        initial=str(run_raw.get("initial", run_defaults.initial)),
        value=float(run_raw.get("value", run_defaults.value)),
        amplitude=float(run_raw.get("amplitude", run_defaults.amplitude)),
        seed=None if seed is None else int(seed),
        expression=run_raw.get("expression"),
    )

    analysis_defaults = AnalysisSection()
    suites = analysis_raw.get("suites", list(analysis_defaults.suites))
    if not isinstance(suites, list):
        raise ScenarioError("'analysis.suites' must be a list of suite names")
    analysis = AnalysisSection(
        suites=tuple(str(s) for s in suites),
        p=float(analysis_raw.get("p", analysis_defaults.p)),
        sigma=float(analysis_raw.get("sigma", analysis_defaults.sigma)),
    )

    output_defaults = OutputSection()
    formats = output_raw.get("formats", list(output_defaults.formats))
    if not isinstance(formats, list):
        raise ScenarioError("'output.formats' must be a list")
    output = OutputSection(
        directory=str(output_raw.get("directory", output_defaults.directory)),
        formats=tuple(str(f) for f in formats),
    )

    scenario = Scenario(model=model, run=run, analysis=analysis, output=output)
    _validate(scenario)
    return scenario


def _opt_float(value):
    return None if value is None else float(value)


def _normalize_bounds(dim: int, bounds) -> tuple[tuple[float, float], ...]:
    seq = list(bounds)
    if dim == 1 and len(seq) == 2 and not isinstance(seq[0], (list, tuple)):
        seq = [seq]
    if len(seq) != dim:
        raise ScenarioError(f"'model.bounds' needs {dim} interval(s)")
    out = []
    for pair in seq:
        if len(pair) != 2:
            raise ScenarioError("'model.bounds' entries must be [lo, hi]")
        out.append((float(pair[0]), float(pair[1])))
    return tuple(out)


def _normalize_resolution(dim: int, resolution) -> tuple[int, ...]:
    if isinstance(resolution, (list, tuple)):
        res = tuple(int(r) for r in resolution)
    else:
        res = (int(resolution),) * dim
    if len(res) != dim:
        raise ScenarioError(f"'model.resolution' needs {dim} value(s)")
    return res


def _validate(scenario: Scenario) -> None:
    m, r, a = scenario.model, scenario.run, scenario.analysis
    if m.dim not in (1, 2):
        raise ScenarioValidationError(f"'model.dim' must be 1 or 2, got {m.dim}")
    for n in m.resolution:
        if n < 2:
            raise ScenarioValidationError("'model.resolution' must be >= 2 per axis")
    for lo, hi in m.bounds:
        if not hi > lo:
            raise ScenarioValidationError(
                f"'model.bounds' interval [{lo}, {hi}] has no volume")
    if m.kernel not in ("gaussian", "tophat", "uniform", "custom"):
        raise ScenarioValidationError(f"unknown kernel family '{m.kernel}'")
    if m.kernel == "gaussian" and (m.sigma is None or m.sigma <= 0):
        raise ScenarioValidationError("gaussian kernel needs 'model.sigma' > 0")
    if m.kernel == "tophat" and (m.radius is None or m.radius <= 0):
        raise ScenarioValidationError("tophat kernel needs 'model.radius' > 0")
    if m.kernel == "custom" and not m.kernel_csv:
        raise ScenarioValidationError("custom kernel needs 'model.kernel_csv'")
    if m.beta < 0 or m.h < 0:
        raise ScenarioValidationError("'model.beta' and 'model.h' must be >= 0")

    for family, params, key in ((m.f, m.f_params, "model.f"),
                                (m.g, m.g_params, "model.g")):
        if family not in available_families():
            raise ScenarioValidationError(
                f"'{key}': unknown nonlinearity family '{family}' "
                f"(available: {', '.join(available_families())})")
        try:
            get_nonlinearity(family, **dict(params))
        except (TypeError, ValueError) as exc:
            raise ScenarioValidationError(f"'{key}': {exc}") from None

    if r.scheme not in STEPPERS:
        raise ScenarioValidationError(
            f"'run.scheme' must be one of {sorted(STEPPERS)}, got '{r.scheme}'")
    if r.dt <= 0 or r.t_end <= 0:
        raise ScenarioValidationError("'run.dt' and 'run.t_end' must be positive")
    if r.initial not in ("constant", "random", "expression"):
        raise ScenarioValidationError(
            f"'run.initial' must be constant | random | expression, "
            f"got '{r.initial}'")
    if r.initial == "random" and r.seed is None:
        raise ScenarioValidationError(
            "'run.seed' is required for a random initial condition")
    if r.initial == "expression" and not r.expression:
        raise ScenarioValidationError(
            "'run.expression' is required for an expression initial condition")

    for suite in a.suites:
        if suite not in SUITE_NAMES:
            raise ScenarioValidationError(
                f"unknown suite '{suite}' (available: {', '.join(SUITE_NAMES)})")
    if not 1 <= a.p < math.inf:
        raise ScenarioValidationError("'analysis.p' must satisfy 1 <= p < inf")
    if a.sigma <= 0:
        raise ScenarioValidationError("'analysis.sigma' must be positive")

    if "lyapunov" in a.suites:
        g = get_nonlinearity(m.g, **dict(m.g_params))
        if g.range_bound is None:
            raise ScenarioValidationError(
                "lyapunov suite needs a saturating response: g must satisfy "
                f"|g(x)| < rho for some rho, but family '{m.g}' is unbounded")
        f = get_nonlinearity(m.f, **dict(m.f_params))
        rho = g.range_bound
        probe = np.linspace(-rho * (1 - 1e-6), rho * (1 - 1e-6), 512)
        if float(np.min(f.deriv(probe))) <= 0.0:
            raise ScenarioValidationError(
                "lyapunov suite needs f with strictly positive derivative "
                f"on the admissible interval; family '{m.f}' fails")
    if "comparison" in a.suites:
        f = get_nonlinearity(m.f, **dict(m.f_params))
        g = get_nonlinearity(m.g, **dict(m.g_params))
        if not (f.monotone and g.monotone):
            raise ScenarioValidationError(
                "comparison suite needs monotone f and g")

    for fmt in scenario.output.formats:
        if fmt not in ("csv", "json"):
            raise ScenarioValidationError(f"unknown output format '{fmt}'")


# ---------------------------------------------------------------------------
# Building runtime objects from a scenario


def build_model(scenario: Scenario) -> Model:
    m = scenario.model
    grid = build_grid(m.dim, m.bounds, m.resolution)
    if m.kernel == "gaussian":
        spec = KernelSpec.gaussian(m.sigma)
    elif m.kernel == "tophat":
        spec = KernelSpec.tophat(m.radius)
    elif m.kernel == "uniform":
        spec = KernelSpec.uniform()
    else:
        spec = KernelSpec.custom(load_kernel_csv(m.kernel_csv))
    kernel = build_kernel(spec, grid)
    f = get_nonlinearity(m.f, **dict(m.f_params))
    g = get_nonlinearity(m.g, **dict(m.g_params))
    return Model(grid=grid, kernel=kernel, f=f, g=g, beta=m.beta, h=m.h)


_EXPR_NAMES = {
    "pi": math.pi, "e": math.e,
    "sin": np.sin, "cos": np.cos, "tan": np.tan, "exp": np.exp,
    "log": np.log, "sqrt": np.sqrt, "tanh": np.tanh, "cosh": np.cosh,
    "sinh": np.sinh, "abs": np.abs, "sign": np.sign,
    "minimum": np.minimum, "maximum": np.maximum, "where": np.where,
}


def build_initial_field(scenario: Scenario, grid: DomainGrid) -> Field:
    """Initial condition per the run section (deterministic under the seed)."""
    r = scenario.run
    if r.initial == "constant":
        values = np.full(grid.n_nodes, r.value)
    elif r.initial == "random":
        rng = np.random.default_rng(r.seed)
        values = r.amplitude * rng.uniform(-1.0, 1.0, grid.n_nodes)
    else:
        names = dict(_EXPR_NAMES)
        names["x"] = grid.nodes[:, 0]
        if grid.dim == 2:
            names["y"] = grid.nodes[:, 1]
        try:
            raw = eval(compile(r.expression, "<initial>", "eval"),
                       {"__builtins__": {}}, names)
        except Exception as exc:
            raise ScenarioValidationError(
                f"initial expression failed: {exc}") from exc
        values = np.broadcast_to(
            np.asarray(raw, dtype=float), (grid.n_nodes,)).copy()
    return Field(grid, values)


# ---------------------------------------------------------------------------
# Emission (round-trip support and manifest echo)


def scenario_to_mapping(scenario: Scenario) -> dict:
    """Plain nested dict (JSON- and TOML-friendly) echoing the scenario."""
    raw = asdict(scenario)
    m = raw["model"]
    m["bounds"] = [list(b) for b in m["bounds"]]
    if scenario.model.dim == 1:
        m["bounds"] = m["bounds"][0]
    m["resolution"] = list(m["resolution"])
    m["f_params"] = dict(m["f_params"])
    m["g_params"] = dict(m["g_params"])
    raw["analysis"]["suites"] = list(raw["analysis"]["suites"])
    raw["output"]["formats"] = list(raw["output"]["formats"])
    for section in raw.values():
        for key in [k for k, v in section.items() if v is None]:
            del section[key]
    return raw


def _toml_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, str):
        return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_toml_value(v) for v in value) + "]"
    if isinstance(value, dict):
        inner = ", ".join(f"{k} = {_toml_value(v)}" for k, v in value.items())
        return "{" + inner + "}"
    raise TypeError(f"cannot emit {type(value)!r} as TOML")


def emit_scenario(scenario: Scenario) -> str:
    """Serialize back to TOML; parsing the emission reproduces the scenario."""
    mapping = scenario_to_mapping(scenario)
    lines = []
    for section in ("model", "run", "analysis", "output"):
        lines.append(f"[{section}]")
        for key, value in mapping[section].items():
            lines.append(f"{key} = {_toml_value(value)}")
        lines.append("")
    return "\n".join(lines)
