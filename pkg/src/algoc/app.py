"""
algoc command line
Verbs for axiom checks, simulation, transport, extremals, PMP verification and full runs
"""

import argparse
import sys
from typing import List, Optional

from loguru import logger

from .components.builtins import list_builtins
from .config.logging_config import setup_logging
from .config.settings import get_settings
from .utils.errors import AlgocError, ConfigError, PipelineError, exit_code_for
from .workflows.scenario_workflow import ScenarioResult, builtin_config, run_scenario
from .workflows.state import ScenarioConfig, load_config

# Unicode symbols for terminal output
SYMBOLS = {
    "pass": "✓",
    "fail": "✗",
    "error": "!",
    "item": "•",
}

VERB_STAGES = {
    "check-axioms": ["axioms"],
    "simulate": ["extremal", "simulate"],
    "transport": ["extremal", "simulate", "transport"],
    "extremal": ["extremal", "simulate", "residuals"],
    "pmp-verify": ["extremal", "simulate", "residuals", "cone"],
    "needle-cone": ["extremal", "simulate", "cone"],
    "run": None,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="algoc", description="Optimal control on almost Lie algebroids")
    sub = parser.add_subparsers(dest="verb", required=True)

    for verb in VERB_STAGES:
        p = sub.add_parser(verb, help=f"{verb.replace('-', ' ')} for a scenario")
        source = p.add_mutually_exclusive_group(required=True)
        source.add_argument("--config", help="scenario config file")
        source.add_argument("--scenario", help="builtin scenario name (see 'algoc list')")
        p.add_argument("--out", help="output directory (default: $ALGOC_OUT_DIR or ./algoc_out/<name>)")
        p.add_argument("--steps", type=int, help="override numerics.steps and numerics.steps_per_segment")
        p.add_argument("--tol", type=float, help="override numerics.tol")
        p.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR")

    p = sub.add_parser("list", help="list builtin scenarios")
    p.add_argument("--log-level", default=None)
    return parser


def _load(args) -> ScenarioConfig:
    if args.config:
        config = load_config(args.config)
    else:
        try:
            config = builtin_config(args.scenario)
        except KeyError as exc:
            raise ConfigError(str(exc).strip("'\"")) from exc
    overrides = {}
    if args.steps is not None:
        if args.steps < 1:
            raise ConfigError("--steps must be positive")
        overrides.update(steps=args.steps, steps_per_segment=args.steps)
    if args.tol is not None:
        if args.tol <= 0:
            raise ConfigError("--tol must be positive")
        overrides["tol"] = args.tol
    if overrides:
        config = config.model_copy(update={"numerics": config.numerics.model_copy(update=overrides)})
    return config


def _print_result(result: ScenarioResult) -> None:
    report = result.report
    for check in report.checks:
        mark = SYMBOLS["pass"] if check.passed else SYMBOLS["fail"]
        print(f"{mark} {check.stage}.{check.name} = {check.value:.3e} (threshold {check.threshold:.1e})")
    status = "PASS" if report.passed else "FAIL"
    print(f"{report.name}: {status} -> {result.out_dir}")


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level or get_settings().log_level)

    if args.verb == "list":
        for name, description in list_builtins():
            print(f"{SYMBOLS['item']} {name}: {description}")
        return 0

    try:
        config = _load(args)
        result = run_scenario(config, stages=VERB_STAGES[args.verb], out_dir=args.out)
    except PipelineError as exc:
        logger.error("{}", exc)
        print(f"{SYMBOLS['error']} {exc}", file=sys.stderr)
        return exc.exit_code
    except AlgocError as exc:
        print(f"{SYMBOLS['error']} {exc}", file=sys.stderr)
        return exit_code_for(exc)

    _print_result(result)
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
