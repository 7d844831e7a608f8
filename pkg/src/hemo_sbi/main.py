"""Command-line entry point: ``hemo <command> ...``."""

from __future__ import annotations

import argparse
import logging
from collections.abc import Sequence

from hemo_sbi import __version__
from hemo_sbi.commands import dataset, evaluate, infer, pipeline, simulate, train
from hemo_sbi.core.handlers import EXIT_USAGE, run_with_handlers
from hemo_sbi.core.logging_config import setup_logging

logger = logging.getLogger(__name__)

# --- Subcommand registry ---
# Each module adds its parsers and sets ``func`` to the command body.
COMMANDS = (simulate, dataset, train, infer, evaluate, pipeline)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hemo",
        description="Pulse-wave simulation, in-silico datasets and posterior estimation of cardiac biomarkers.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="<command>", required=True)
    for module in COMMANDS:
        module.register(sub)
    return parser


def dispatch(argv: Sequence[str] | None = None) -> int:
    """Parse *argv* and run the selected command; return the exit code.

    0 on success, 1 on a domain error, 2 on a usage error.
    """
    setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 0 for --help/--version and 2 for bad usage
        code = exc.code
        return code if isinstance(code, int) else EXIT_USAGE
    logger.debug("Running %s", args.command)
    return run_with_handlers(lambda: int(args.func(args)))


def main() -> int:
    return dispatch()
