"""Command-line entry point: ``rabi-dce {run,sweep,resume,validate}``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 truncation breach.
"""

import argparse
import logging
import sys
from collections.abc import Sequence
from pathlib import Path
from typing import Any

from rabi_dce import runner
from rabi_dce.config import (
    PRESETS,
    canonical_json,
    config_hash,
    load_config,
    parse_override,
    parse_value,
    resolve_config,
)
from rabi_dce.errors import ConfigError, NumericalError, RabiDceError
from rabi_dce.schemas import RunConfig

logger = logging.getLogger(__name__)

EXIT_OK = 0


def _add_config_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("config", nargs="?", type=Path, help="configuration file")
    parser.add_argument("--preset", choices=sorted(PRESETS), help="figure parameter set")
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override one configuration key (repeatable)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rabi-dce",
        description="Photon generation and metrology in the modulated quantum Rabi model.",
    )
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    parser.add_argument("--quiet", action="store_true", help="no progress bar, warnings and errors only")
    verbs = parser.add_subparsers(dest="verb", required=True)

    run = verbs.add_parser("run", help="integrate one configuration")
    _add_config_arguments(run)
    run.add_argument("--output", type=Path, help="output directory (overrides the config)")
    run.add_argument(
        "--paired", action="store_true", help="also run without dissipation, into dissipative/ and unitary/"
    )

    sweep = verbs.add_parser("sweep", help="one run per value of a parameter")
    _add_config_arguments(sweep)
    sweep.add_argument("--axis", help="key to vary (defaults to the sweep section)")
    sweep.add_argument("--values", help="comma separated values (defaults to the sweep section)")
    sweep.add_argument("--workers", type=int, help="parallel runs")
    sweep.add_argument("--output", type=Path, help="base output directory")

    resume = verbs.add_parser("resume", help="continue a run from its checkpoint")
    resume.add_argument("checkpoint", type=Path)
    resume.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
    resume.add_argument("--output", type=Path, help="directory holding the CSV (defaults to the checkpoint's)")

    validate = verbs.add_parser("validate", help="resolve and check a configuration, print it with its hash")
    _add_config_arguments(validate)
    return parser


def configure_logging(level: str, quiet: bool) -> None:
    logging.basicConfig(
        level=logging.WARNING if quiet else getattr(logging, level),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def resolve_arguments(args: argparse.Namespace) -> RunConfig:
    overrides = [parse_override(text) for text in args.overrides]
    if args.preset:
        overrides.insert(0, ("preset", args.preset))
    if args.config is not None:
        return load_config(args.config, overrides)
    if not overrides:
        raise ConfigError("Give a configuration file, --preset or --set keys")
    return resolve_config({}, overrides)


def _parse_values(text: str) -> list[Any]:
    return [parse_value(item) for item in text.split(",") if item.strip()]


def _show_progress(config: RunConfig, args: argparse.Namespace) -> bool:
    return config.output.progress and not args.quiet and sys.stderr.isatty()


def cmd_run(args: argparse.Namespace) -> int:
    config = resolve_arguments(args)
    progress = _show_progress(config, args)
    if args.paired:
        outcomes = runner.execute_paired(config, args.output, progress=progress)
    else:
        outcomes = [runner.execute(config, args.output, progress=progress)]
    for outcome in outcomes:
        logger.info("wrote %d rows to %s", outcome.rows, outcome.csv_path)
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    config = resolve_arguments(args)
    section = config.sweep
    axis = args.axis or (section.axis if section else None)
    if args.values is not None:
        values = _parse_values(args.values)
    else:
        values = list(section.values) if section else []
    workers = args.workers or (section.workers if section else 1)
    if not axis:
        raise ConfigError("sweep needs an axis (--axis or the sweep section)")
    outcomes = runner.sweep(config, axis, values, args.output, workers=workers, progress=_show_progress(config, args))
    return max((o.exit_code for o in outcomes), default=EXIT_OK)


def cmd_resume(args: argparse.Namespace) -> int:
    overrides = [parse_override(text) for text in args.overrides]
    outcome = runner.resume(args.checkpoint, args.output, overrides, progress=not args.quiet and sys.stderr.isatty())
    logger.info("appended %d rows to %s", outcome.rows, outcome.csv_path)
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    config = resolve_arguments(args)
    print(f"config_hash: {config_hash(config)}")
    print(canonical_json(config))
    return EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "sweep": cmd_sweep,
    "resume": cmd_resume,
    "validate": cmd_validate,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level, args.quiet)
    try:
        return COMMANDS[args.verb](args)
    except RabiDceError as e:
        logger.error("%s", e)
        if isinstance(e, NumericalError) and e.diagnostics:
            logger.error("diagnostics: %s", e.diagnostics)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
