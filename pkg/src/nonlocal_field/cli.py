"""Command-line front end.

Subcommands: simulate, verify, equilibria, kernel-info; each takes a
scenario file, with --output-dir overriding the scenario's output section.
Exit codes: 0 success, 1 usage or scenario errors, 2 runtime divergence or
non-convergence, 3 verification failure.
"""

from __future__ import annotations

import argparse
import sys

from .errors import NonlocalFieldError, ScenarioError
from .runio import run_equilibria, run_kernel_info, run_simulate, run_verify
from .scenario import parse_scenario


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ScenarioError(message)


def _build_parser() -> _Parser:
    parser = _Parser(
        prog="nonlocal-field",
        description="Simulate a nonlocal evolution model and verify its "
                    "analytic guarantees.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("simulate", "integrate the configured run and write trajectories"),
        ("verify", "run the requested verification suites"),
        ("equilibria", "solve for an equilibrium from the initial condition"),
        ("kernel-info", "summarize the discretized kernel"),
    ):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("scenario", help="path to a scenario TOML file")
        cmd.add_argument("--output-dir", default=None,
                         help="override the scenario's output directory")
    return parser


_COMMANDS = {
    "simulate": run_simulate,
    "verify": run_verify,
    "equilibria": run_equilibria,
    "kernel-info": run_kernel_info,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    try:
        scenario = parse_scenario(args.scenario)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    try:
        result, code = _COMMANDS[args.command](scenario, args.output_dir)
    except NonlocalFieldError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    _print_summary(args.command, result)
    return code


def _print_summary(command: str, manifest: dict) -> None:
    if command == "simulate":
        status = manifest["status"]
        if status == "ok":
            s = manifest["summary"]
            print(f"simulate: ok  t={s['final_time']:g}  "
                  f"|u|_2={s['final_L2']:.6g}  |u|_inf={s['final_Linf']:.6g}")
        else:
            print(f"simulate: diverged at t={manifest['failure_time']:g}")
    elif command == "verify":
        for verdict in manifest["suites"]:
            line = f"verify: {verdict['suite']}: {verdict['status']}"
            if verdict.get("reason"):
                line += f" ({verdict['reason']})"
            print(line)
    elif command == "equilibria":
        if manifest["status"] == "ok":
            eq = manifest["equilibrium"]
            print(f"equilibria: residual={eq['residual']:.3e} "
                  f"iterations={eq['iterations']} "
                  f"mean={eq['state_mean']:.9g}")
        else:
            print("equilibria: solver did not converge")
    else:
        print(f"kernel-info: nodes={manifest['nodes']} "
              f"norm_1={manifest['norm_1']:.6g} "
              f"norm_inf={manifest['norm_inf']:.6g} "
              f"tail_max={manifest['tail_mass_max']:.3e}")


if __name__ == "__main__":
    sys.exit(main())
