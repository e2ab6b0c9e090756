import argparse
from typing import List, Optional
from loguru import logger
import sys
import os

# Add shared directory to path
sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

from shared.models import ExperimentConfig, Granularity
from shared.config import Config, FigurePresets, parse_seed_list
from shared.errors import SimulationError, ConfigError
from simulator.adversaries import validate_replay_file
from simulator.config_loader import load_experiment_config, preset_config
from simulator.game_runner import run_experiment, run_sweep, sweep_exponents, SWEEPABLE
from simulator.results_store import (
    write_records_csv, write_aggregate_csv, write_sweep_csv, write_metadata, derived_path
)
from simulator.statistics import aggregate, final_regret_summary


def configure_logging(verbose: bool = False) -> None:
    logger.remove()
    logger.add(sys.stderr, level="DEBUG" if verbose or Config.DEBUG else Config.LOG_LEVEL)


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seeds", help="Replicate seeds, e.g. 0-19 or 0,3,7")
    parser.add_argument("--out", help="Output CSV path")
    parser.add_argument("--threads", type=int, help="Worker threads (default: $COMBAT_SWITCH_THREADS or 1)")
    parser.add_argument("--granularity", choices=[g.value for g in Granularity], help="Record every round or every batch")
    parser.add_argument("--verbose", "-v", action="store_true", help="Enable verbose logging")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="combat-switch",
        description="Combinatorial bandits with switching costs: batched learners, lower-bound adversaries and regret experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Execute an experiment file")
    run.add_argument("config_file", nargs="?", help="KEY=VALUE experiment file")
    run.add_argument("--config", help="Experiment file (alternative to the positional argument)")
    _add_common_flags(run)

    sweep = sub.add_parser("sweep", help="Vary one problem parameter and fit the regret exponent")
    sweep.add_argument("--config", help="Base experiment file")
    sweep.add_argument("--figure", choices=FigurePresets.names(), help="Start from a figure preset")
    sweep.add_argument("--vary", choices=list(SWEEPABLE), help="Parameter to vary")
    sweep.add_argument("--values", help="Comma-separated values of the varied parameter")
    _add_common_flags(sweep)

    replay = sub.add_parser("replay-check", help="Validate a replay loss file")
    replay.add_argument("path", help="Headerless CSV, one row per round")
    replay.add_argument("--k", type=int, help="Expected number of base arms")
    replay.add_argument("--verbose", "-v", action="store_true", help="Enable verbose logging")

    figure = sub.add_parser("figure", help="Emit the CSV backing a published figure")
    figure.add_argument("name", choices=FigurePresets.names(), help="Figure preset")
    _add_common_flags(figure)
    return parser


def _apply_flags(config: ExperimentConfig, args: argparse.Namespace) -> ExperimentConfig:
    update = {}
    if args.seeds:
        try:
            update["seeds"] = parse_seed_list(args.seeds)
        except ValueError as e:
            raise ConfigError(f"invalid --seeds: {e}") from e
    if args.out:
        update["output_path"] = args.out
    if args.granularity:
        update["record_granularity"] = Granularity(args.granularity)
    return config.model_copy(update=update) if update else config


def _parse_values(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise ConfigError(f"invalid --values: {e}") from e


def _run_and_write(config: ExperimentConfig, threads: Optional[int]) -> None:
    result = run_experiment(config, threads)
    write_records_csv(config.output_path, result.records)
    write_aggregate_csv(derived_path(config.output_path, ".aggregate.csv"), aggregate(result.records))
    write_metadata(config.output_path, result.metadata())
    for policy_id, (mean, se, n) in final_regret_summary(result.records).items():
        print(f"{policy_id}\tfinal regret {mean:.6g} ± {se:.3g} ({n} seeds)")
    logger.info(f"✅ Results written to {config.output_path}")


def _sweep_and_write(config: ExperimentConfig, vary: str, values: List[float], threads: Optional[int]) -> None:
    if not vary or not values:
        raise ConfigError("sweep needs --vary and --values (or a sweep figure preset)")
    points, results = run_sweep(config, vary, values, threads)
    write_sweep_csv(config.output_path, points)
    metadata = {"vary": vary, "values": values, "runs": [r.metadata() for r in results]}
    exponents = sweep_exponents(points)
    metadata["exponents"] = {p: {"exponent": e, "r_squared": r2} for p, (e, r2) in exponents.items()}
    write_metadata(config.output_path, metadata)
    for policy_id, (exponent, r_squared) in exponents.items():
        print(f"{policy_id}\tregret ~ {vary}^{exponent:.3f}\tr2={r_squared:.3f}")
    logger.info(f"✅ Sweep written to {config.output_path}")


def _command_run(args: argparse.Namespace) -> None:
    path = args.config or args.config_file
    if not path:
        raise ConfigError("run needs an experiment file")
    config = _apply_flags(load_experiment_config(path), args)
    _run_and_write(config, args.threads)


def _command_sweep(args: argparse.Namespace) -> None:
    vary, values = args.vary, _parse_values(args.values) if args.values else []
    if args.figure:
        config, preset_vary, preset_values = preset_config(args.figure)
        vary = vary or preset_vary
        values = values or preset_values
    elif args.config:
        config = load_experiment_config(args.config)
    else:
        raise ConfigError("sweep needs --config or --figure")
    config = _apply_flags(config, args)
    if not args.out:
        config = config.model_copy(update={"output_path": derived_path(config.output_path, f".sweep-{vary}.csv")})
    _sweep_and_write(config, vary, values, args.threads)


def _command_figure(args: argparse.Namespace) -> None:
    config, vary, values = preset_config(args.name)
    config = _apply_flags(config, args)
    if vary:
        _sweep_and_write(config, vary, values, args.threads)
    else:
        _run_and_write(config, args.threads)


def _command_replay_check(args: argparse.Namespace) -> None:
    summary = validate_replay_file(args.path, args.k)
    print(f"{args.path}: {summary['rows']} rows x {summary['columns']} columns, "
          f"values in [{summary['min']:g}, {summary['max']:g}]")


COMMANDS = {
    "run": _command_run,
    "sweep": _command_sweep,
    "figure": _command_figure,
    "replay-check": _command_replay_check,
}


def cli_main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    configure_logging(args.verbose)
    try:
        COMMANDS[args.command](args)
    except (SimulationError, FileNotFoundError) as e:
        logger.error(f"❌ {args.command} failed: {e}")
        return 1
    return 0
