"""
Command-Line Routes

Maps the run, validate, replay and sweep subcommands onto the presenter and
utility layers. Configuration problems exit with status 2, any other failure
with status 1.
"""

import argparse
import json
import logging
from pathlib import Path
from typing import Callable, Dict, List, Optional

from app.core.config import settings
from app.core.errors import CleanupError, ConfigurationError
from app.presenters.experiment_presenter import experiment_presenter
from app.utils.config_parser import load_config, parse_value, with_overrides
from app.utils.replay_writer import parse_replay, pretty_frames

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2


def _seed_list(text: str) -> List[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"seeds must be comma-separated integers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="python -m app.main",
        description=f"{settings.PROJECT_NAME}: Cleanup with hidden identities and dynamic teams",
    )
    parser.add_argument("--log-level", default=None, help="Override LOG_LEVEL")
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="Run an experiment and write result files")
    run.add_argument("--config", required=True, help="Path to the TOML experiment document")
    run.add_argument("--out", default=None, help="Output directory (overrides [experiment] outputDir)")
    run.add_argument("--seeds", type=_seed_list, default=None, help="Comma-separated seeds, e.g. 0,1,2")
    run.add_argument("--episodes", type=int, default=None, help="Episodes per seed")
    run.add_argument("--replay", action="store_true", help="Write one replay file per episode")
    run.add_argument("--timeseries", action="store_true", help="Write per-step timeseries.csv")
    run.add_argument("--workers", type=int, default=None, help="Worker processes for seeds")

    validate = commands.add_parser("validate", help="Validate a config and print the effective values")
    validate.add_argument("--config", required=True, help="Path to the TOML experiment document")

    replay = commands.add_parser("replay", help="Pretty-print a replay file")
    replay.add_argument("--file", required=True, help="Replay file written by run --replay")

    sweep = commands.add_parser("sweep", help="Run one experiment per value of a parameter")
    sweep.add_argument("--config", required=True, help="Path to the TOML experiment document")
    sweep.add_argument("--out", required=True, help="Root output directory")
    sweep.add_argument("--param", required=True, help="key=v1,v2,... e.g. identityRatio=0,0.5,1")
    return parser


def run_command(args: argparse.Namespace) -> int:
    spec = with_overrides(
        load_config(args.config),
        seeds=args.seeds,
        episodes=args.episodes,
        output_dir=args.out,
        write_replays=True if args.replay else None,
        write_timeseries=True if args.timeseries else None,
        workers=args.workers,
    )
    summary = experiment_presenter.run_experiment(spec)
    print(summary.model_dump_json(indent=2))
    return EXIT_OK


def validate_command(args: argparse.Namespace) -> int:
    spec = load_config(args.config)
    print(json.dumps(spec.echo(), indent=2, ensure_ascii=False))
    return EXIT_OK


def replay_command(args: argparse.Namespace) -> int:
    replay = parse_replay(Path(args.file).read_text(encoding="utf-8"))
    print(pretty_frames(replay))
    return EXIT_OK


def sweep_command(args: argparse.Namespace) -> int:
    key, sep, raw_values = args.param.partition("=")
    if not sep or not raw_values:
        raise argparse.ArgumentTypeError(f"--param must look like key=v1,v2, got {args.param!r}")
    values = [parse_value(v.strip()) for v in raw_values.split(",") if v.strip()]
    table = experiment_presenter.run_sweep(load_config(args.config), key.strip(), values, args.out)
    print(table.to_string(index=False))
    return EXIT_OK


COMMANDS: Dict[str, Callable[[argparse.Namespace], int]] = {
    "run": run_command,
    "validate": validate_command,
    "replay": replay_command,
    "sweep": sweep_command,
}


def dispatch(argv: Optional[List[str]] = None) -> int:
    """Parse arguments and run one subcommand; returns the process exit status."""
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigurationError as e:
        logger.error(f"Configuration error: {str(e)}")
        return EXIT_CONFIG
    except argparse.ArgumentTypeError as e:
        logger.error(f"Invalid argument: {str(e)}")
        return EXIT_CONFIG
    except (CleanupError, OSError, ValueError) as e:
        logger.error(f"{args.command} failed: {str(e)}")
        return EXIT_FAILURE
