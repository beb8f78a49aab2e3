"""
Command line interface.

    python -m coop_sampling run --scenario scenarios/minimal.yaml
    python -m coop_sampling compare --scenario scenarios/adverse_weather_skewed.yaml --seeds 10
    python -m coop_sampling verify --scenario scenarios/one_iteration.yaml

Exit codes: 0 success, 1 other failure, 2 configuration error,
3 convergence failure, 4 property violation found by `verify`.
"""

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from coop_sampling.config import Config
from coop_sampling.errors import ConfigError, CoopSamplingError, MaxIterationsExceeded, NotConverged
from coop_sampling.loader import parse_scenario_config
from coop_sampling.messaging import CommMode
from coop_sampling.policies import PolicyKind
from coop_sampling.reporting import emit_round_metrics, improvement_pct, write_summary
from coop_sampling.simulation import Realization, ScenarioRun, run_scenario
from coop_sampling.verification import summarize_checks, verify_run

logger = logging.getLogger("coop_sampling")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_CONVERGENCE = 3
EXIT_VIOLATION = 4


def configure_logging(verbose: bool = False) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else getattr(logging, Config.LOG_LEVEL.upper(), logging.INFO),
        format=Config.LOG_FORMAT,
    )


def _read_document(path: str) -> str:
    scenario_path = Path(path)
    if not scenario_path.exists():
        raise ConfigError(f"scenario file not found: {scenario_path}", field="scenario")
    return scenario_path.read_text(encoding="utf-8")


def _final_l2(run: ScenarioRun) -> float:
    return float(run.metrics[-1].l2_distance)


# --- Commands ---


def cmd_run(args: argparse.Namespace) -> int:
    scenario = parse_scenario_config(_read_document(args.scenario), seed=args.seed)
    scenario = scenario.with_overrides(
        policy=PolicyKind(args.policy) if args.policy else None,
        comm_mode=CommMode(args.comm_mode) if args.comm_mode else None,
        realization=Realization(args.realization) if args.realization else None,
    )
    out_dir = Path(args.out_dir or Config.OUT_DIR)

    run = run_scenario(scenario)
    emit_round_metrics(run.metrics, out_dir / scenario.policy.value / "metrics.csv")

    checks = verify_run(run, full=False)
    summary = {
        "scenario": scenario.name,
        "policy": scenario.policy.value,
        "seed": scenario.seed,
        "final_l2": {scenario.policy.value: _final_l2(run)},
        "improvement_pct": None,
        "total_messages": int(run.metrics[-1].cumulative_messages),
        "sweeps": [int(row.sweeps) for row in run.metrics[1:]],
        "verify_verdicts": summarize_checks(checks),
    }
    write_summary(summary, out_dir / "summary.json")
    if args.print_summary:
        print(json.dumps(summary, indent=2, sort_keys=True))
    return EXIT_OK


def _run_cell(document: str, policy: PolicyKind, seed: int) -> ScenarioRun:
    scenario = parse_scenario_config(document, seed=seed).with_overrides(policy=policy)
    return run_scenario(scenario)


def cmd_compare(args: argparse.Namespace) -> int:
    document = _read_document(args.scenario)
    base_seed = args.seed if args.seed is not None else parse_scenario_config(document).seed
    seeds = [base_seed + offset for offset in range(args.seeds)]
    out_dir = Path(args.out_dir or Config.OUT_DIR)
    workers = args.workers or Config.WORKERS

    cells = [(policy, seed) for policy in PolicyKind for seed in seeds]
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        futures = {cell: pool.submit(_run_cell, document, *cell) for cell in cells}
        runs: Dict[Tuple[PolicyKind, int], ScenarioRun] = {cell: future.result() for cell, future in futures.items()}

    finals: Dict[str, List[float]] = {}
    messages: Dict[str, int] = {}
    for policy in PolicyKind:
        policy_runs = [runs[(policy, seed)] for seed in seeds]
        rows = [row for run in policy_runs for row in run.metrics]
        emit_round_metrics(rows, out_dir / policy.value / "metrics.csv")
        finals[policy.value] = [_final_l2(run) for run in policy_runs]
        messages[policy.value] = int(sum(run.metrics[-1].cumulative_messages for run in policy_runs))

    greedy = finals[PolicyKind.GREEDY.value]
    interactive = finals[PolicyKind.INTERACTIVE.value]
    wins = sum(i < g for i, g in zip(interactive, greedy))
    summary = {
        "scenario": parse_scenario_config(document, seed=base_seed).name,
        "seeds": seeds,
        "final_l2": {name: float(np.mean(values)) for name, values in finals.items()},
        "final_l2_per_seed": finals,
        "improvement_pct": improvement_pct(float(np.mean(greedy)), float(np.mean(interactive))),
        "interactive_wins": wins,
        "total_messages": messages,
        "verify_verdicts": {"interactive_beats_greedy_every_seed": wins == len(seeds)},
    }
    write_summary(summary, out_dir / "summary.json")
    logger.info(f"Interactive improves on greedy by {summary['improvement_pct']:.2f}% ({wins}/{len(seeds)} seeds)")
    if args.print_summary:
        print(json.dumps(summary, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    scenario = parse_scenario_config(_read_document(args.scenario), seed=args.seed).with_overrides(
        policy=PolicyKind.INTERACTIVE,
        realization=Realization.EXPECTED,
    )
    out_dir = Path(args.out_dir or Config.OUT_DIR)

    run = run_scenario(scenario)
    checks = verify_run(run, full=True)
    failed = [check for check in checks if not check.passed]
    report = {
        "scenario": scenario.name,
        "seed": scenario.seed,
        "verify_verdicts": summarize_checks(checks),
        "failures": [check.to_dict() for check in failed],
        "checks": len(checks),
    }
    write_summary(report, out_dir / "verify.json")
    if failed:
        logger.error(f"{len(failed)} property violations")
        return EXIT_VIOLATION
    return EXIT_OK


# --- Entry point ---


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coop_sampling",
        description="Cooperative data sampling for robot fleets: simulate, compare and verify sampling policies.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    commands = parser.add_subparsers(dest="command", required=True)

    def common(sub: argparse.ArgumentParser) -> None:
        sub.add_argument("--scenario", required=True, help="path to a YAML scenario document")
        sub.add_argument("--seed", type=int, default=None, help="override the scenario seed")
        sub.add_argument("--out-dir", default=None, help=f"output directory (default {Config.OUT_DIR})")
        sub.add_argument("--print-summary", action="store_true", help="also print the summary to stdout")

    run = commands.add_parser("run", help="run one scenario and emit its metrics")
    common(run)
    run.add_argument("--policy", choices=PolicyKind.names(), default=None)
    run.add_argument("--comm-mode", choices=[mode.value for mode in CommMode], default=None)
    run.add_argument("--realization", choices=[mode.value for mode in Realization], default=None)
    run.set_defaults(handler=cmd_run)

    compare = commands.add_parser("compare", help="run every policy over several seeds")
    common(compare)
    compare.add_argument("--seeds", type=int, required=True, help="number of consecutive seeds")
    compare.add_argument("--workers", type=int, default=None, help="parallel (policy, seed) cells")
    compare.set_defaults(handler=cmd_compare)

    verify = commands.add_parser("verify", help="check the policy properties on a scenario")
    common(verify)
    verify.set_defaults(handler=cmd_verify)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    try:
        return args.handler(args)
    except ConfigError as error:
        logger.error(json.dumps(error.to_dict()))
        return EXIT_CONFIG
    except (NotConverged, MaxIterationsExceeded) as error:
        logger.error(json.dumps(error.to_dict()))
        return EXIT_CONVERGENCE
    except CoopSamplingError as error:
        logger.error(json.dumps(error.to_dict()))
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
