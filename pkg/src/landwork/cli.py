"""``landwork`` command-line entry point.

Exit codes: 0 complete and within budget, 1 input error, 2 budget exceeded,
3 stalled.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace

from .compartments import PlanningError
from .engine import Simulation, plan_scenario, write_trace
from .report import compute_metrics, emit_report
from .scenario import SCHEME_ALIASES, STRATEGY_ALIASES, ScenarioError, load_scenario, scenario_warnings

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_BUDGET = 2
EXIT_STALL = 3


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="landwork", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log planning warnings")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="plan and simulate a scenario")
    run.add_argument("--scenario", required=True, metavar="FILE")
    run.add_argument("--seed", type=int)
    run.add_argument("--strategy", choices=sorted(STRATEGY_ALIASES))
    run.add_argument("--scheme", choices=sorted(SCHEME_ALIASES))
    run.add_argument("--trace", metavar="FILE", help="write one phase record per line (NDJSON)")
    run.add_argument("--format", choices=["json", "csv", "text"], default="json")
    run.add_argument("--out", metavar="FILE", help="report destination (default: standard output)")

    plan = sub.add_parser("plan", help="run the planning pipeline only")
    plan.add_argument("--scenario", required=True, metavar="FILE")

    validate = sub.add_parser("validate", help="check a scenario file and list scale advisories")
    validate.add_argument("--scenario", required=True, metavar="FILE")
    return parser


def _cmd_run(args) -> int:
    sc = load_scenario(args.scenario)
    overrides = {}
    if args.seed is not None:
        if args.seed < 0:
            raise ScenarioError("--seed", "must be a non-negative integer")
        overrides["seed"] = args.seed
    if args.strategy:
        overrides["coordination"] = STRATEGY_ALIASES[args.strategy]
    if args.scheme:
        overrides["multiplex"] = SCHEME_ALIASES[args.scheme]
    if overrides:
        sc = replace(sc, **overrides)
    trace = Simulation(sc).run()
    if args.trace:
        write_trace(trace, args.trace)
    report = compute_metrics(trace, sc)
    emit_report(report, args.format, args.out)
    if report.stalled:
        return EXIT_STALL
    if not report.budget.passed:
        return EXIT_BUDGET
    return EXIT_OK


def _cmd_plan(args) -> int:
    plan = plan_scenario(load_scenario(args.scenario))
    sys.stdout.write(json.dumps(plan.to_dict(), indent=2) + "\n")
    return EXIT_OK


def _cmd_validate(args) -> int:
    sc = load_scenario(args.scenario)
    warnings = scenario_warnings(sc)
    print(f"ok: {len(sc.structure.segments)} segments, {sc.structure.total_length_ft:g} ft, "
          f"{len(sc.sites)} sites, {len(sc.fleet)} drones")
    for w in warnings:
        print(f"warning [{w.code}]: {w.message}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    handler = {"run": _cmd_run, "plan": _cmd_plan, "validate": _cmd_validate}[args.command]
    try:
        return handler(args)
    except (ScenarioError, PlanningError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
