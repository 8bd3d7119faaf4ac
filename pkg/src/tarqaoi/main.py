import argparse
import json
import logging
import sys
import uuid
from typing import Optional, Sequence

from pydantic import ValidationError

from tarqaoi import __version__
from tarqaoi.cli import analyze, optimize, simulate, sweep, validate
from tarqaoi.core.config import get_settings
from tarqaoi.core.context import set_command, set_run_id
from tarqaoi.core.errors import InvalidConfig, InvalidScenario, NoConvergence, TarqAoiError
from tarqaoi.core.logging_config import setup_logging

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_MISMATCH = 1
EXIT_INPUT = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tarq-aoi",
        description="Age of information under source-aware truncated ARQ: "
        "closed forms, simulation, validation and grid optimization.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default=None, help="overrides TARQAOI_LOG_LEVEL")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for module in (analyze, simulate, validate, sweep, optimize):
        module.register(subparsers)
    return parser


def _report(error: TarqAoiError) -> None:
    print(json.dumps({"errors": [error.to_dict()]}, sort_keys=True))


def run(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    settings = get_settings()
    setup_logging((args.log_level or settings.log_level).upper())

    set_run_id(str(uuid.uuid4()))
    set_command(args.command)
    logger.info("Command started", extra={"version": __version__})

    try:
        code = args.handler(args)
    except ValidationError as e:
        error = InvalidConfig(str(e), InvalidScenario.from_validation_error(e, path="<flags>").issues)
        logger.warning("Invalid flags", extra={"issue_count": len(error.issues)})
        _report(error)
        return EXIT_INPUT
    except NoConvergence as e:
        logger.exception("Numerical engine did not converge", extra={"error": str(e)})
        _report(e)
        return EXIT_MISMATCH
    except TarqAoiError as e:
        logger.warning("Invalid input", extra={"error": str(e), "error_type": type(e).__name__})
        _report(e)
        return EXIT_INPUT

    logger.info("Command finished", extra={"exit_code": code})
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
