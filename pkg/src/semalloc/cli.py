"""Command-line entry point.

Commands::

    semalloc solve               --config C [--solver structural|enumeration] [--budget N]
    semalloc evaluate            --config C --decision D [--scenarios CSV]
    semalloc compare             --config C [--seed S] [--random-trials N] [--holdout COUNT] [--format json|csv]
    semalloc generate-scenarios  --spec S --seed S --count N
    semalloc metrics             --config C [--facility-joules X --it-joules Y]

Output goes to ``--output`` (stdout if omitted). Failures print a JSON
object ``{"code": ..., "message": ...}`` on stderr and exit with 2
(config or validation), 3 (infeasible) or 4 (enumeration budget).
"""

from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from pathlib import Path
from typing import Sequence

from . import __version__
from .baselines import compare, holdout_scenarios
from .errors import (
    BudgetExceededError,
    ConfigError,
    InfeasibleError,
    SemallocError,
    ValidationError,
)
from .model import load_config
from .recourse import evaluate_decision
from .reports import (
    comparison_to_csv,
    comparison_to_dict,
    decision_from_dict,
    dumps,
    metrics_report,
    solve_result_to_dict,
)
from .scenarios import ScenarioSpec, load_scenarios, sample_scenarios, scenarios_to_csv
from .sip import DEFAULT_BUDGET, solve

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_BUDGET = 4

_EXIT_CODES = {
    ConfigError: EXIT_CONFIG,
    ValidationError: EXIT_CONFIG,
    InfeasibleError: EXIT_INFEASIBLE,
    BudgetExceededError: EXIT_BUDGET,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def resolve_input(path: str) -> Path:
    """Local path if it exists, else a bundled file of the same name."""
    p = Path(path)
    if p.exists() or p.is_absolute() or len(p.parts) > 1:
        return p
    bundled = resources.files("semalloc") / "data" / p.name
    return Path(str(bundled)) if bundled.is_file() else p


def _read_json(path: str, what: str):
    p = resolve_input(path)
    try:
        return json.loads(p.read_text(encoding="utf-8")), p
    except OSError as exc:
        raise ConfigError(f"cannot read {what} {p}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: malformed JSON at line {exc.lineno}: {exc.msg}") from exc


def _emit(text: str, output: str | None) -> None:
    if output is None:
        sys.stdout.write(text)
        return
    path = Path(output)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="semalloc", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"semalloc {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--config", required=True, help="market config JSON")
        p.add_argument("--output", "-o", help="output file (default: stdout)")
        p.add_argument("--format", choices=("json", "csv"), default="json")

    p = sub.add_parser("solve", help="solve the two-stage program")
    common(p)
    p.add_argument("--solver", choices=("structural", "enumeration"), default="structural")
    p.add_argument("--budget", type=int, default=DEFAULT_BUDGET, help="enumeration node budget")

    p = sub.add_parser("evaluate", help="score a given first-stage decision")
    common(p)
    p.add_argument("--decision", required=True, help="decision or solve-result JSON")
    p.add_argument("--scenarios", help="scenario CSV to score on (default: the config's)")

    p = sub.add_parser("compare", help="SIP vs EVF vs random policies")
    common(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--random-trials", type=int, default=100)
    p.add_argument("--holdout", type=int, metavar="COUNT",
                   help="score on COUNT fresh scenarios sampled from scenario_spec")
    p.add_argument("--csv", dest="csv_output", help="also write the plot CSV here")

    p = sub.add_parser("generate-scenarios", help="sample a scenario CSV")
    p.add_argument("--output", "-o", help="output CSV (default: stdout)")
    p.add_argument("--spec", required=True, help="JSON with a 'distributions' map")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--count", type=int, required=True)

    p = sub.add_parser("metrics", help="energy efficiency, PUE and energy per transmission")
    common(p)
    p.add_argument("--facility-joules", type=float)
    p.add_argument("--it-joules", type=float)
    return parser


def _check_args(args) -> None:
    json_only = {"solve", "evaluate", "metrics"}
    if args.command in json_only and args.format != "json":
        raise UsageError(f"{args.command} only writes json")
    if args.command == "compare" and args.random_trials < 1:
        raise UsageError("--random-trials must be >= 1")
    if args.command == "generate-scenarios" and args.count < 1:
        raise UsageError("--count must be >= 1")
    if args.command == "compare" and args.holdout is not None and args.holdout < 1:
        raise UsageError("--holdout must be >= 1")
    if args.command == "metrics" and (args.facility_joules is None) != (args.it_joules is None):
        raise UsageError("--facility-joules and --it-joules go together")


def run(args: argparse.Namespace) -> int:
    if args.command == "generate-scenarios":
        data, _ = _read_json(args.spec, "scenario spec")
        spec = ScenarioSpec.from_dict(data, "spec")
        _emit(scenarios_to_csv(sample_scenarios(spec, args.seed, args.count)), args.output)
        return EXIT_OK

    config = load_config(resolve_input(args.config))

    if args.command == "solve":
        result = solve(config, args.solver, args.budget)
        _emit(dumps(solve_result_to_dict(result, config)), args.output)
    elif args.command == "evaluate":
        data, _ = _read_json(args.decision, "decision")
        decision = decision_from_dict(data, config)
        scenarios = load_scenarios(args.scenarios) if args.scenarios else None
        result = evaluate_decision(decision, scenarios, config)
        _emit(dumps(solve_result_to_dict(result, config)), args.output)
    elif args.command == "compare":
        holdout = None
        if args.holdout is not None:
            holdout = holdout_scenarios(config, args.seed, args.holdout)
        cmp = compare(config, args.random_trials, args.seed, holdout=holdout)
        if args.format == "csv":
            _emit(comparison_to_csv(cmp), args.output)
        else:
            _emit(dumps(comparison_to_dict(cmp)), args.output)
            csv_path = args.csv_output
            if csv_path is None and args.output is not None and Path(args.output).suffix != ".csv":
                csv_path = str(Path(args.output).with_suffix(".csv"))
            if csv_path is not None:
                _emit(comparison_to_csv(cmp), csv_path)
    elif args.command == "metrics":
        plan = solve(config)
        report = metrics_report(config, plan, args.facility_joules, args.it_joules)
        _emit(dumps(report), args.output)
    return EXIT_OK


def _fail(code: str, message: str, status: int) -> int:
    sys.stderr.write(json.dumps({"code": code, "message": message, "exit_status": status}) + "\n")
    return status


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        _check_args(args)
    except UsageError as exc:
        return _fail("usage_error", str(exc), EXIT_CONFIG)
    try:
        return run(args)
    except SemallocError as exc:
        status = next((s for cls, s in _EXIT_CODES.items() if isinstance(exc, cls)), 1)
        return _fail(exc.code, str(exc), status)


if __name__ == "__main__":
    sys.exit(main())
