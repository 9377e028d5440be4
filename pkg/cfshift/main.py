"""
cfshift - Command-Line Entry Point.

Usage: python -m cfshift.main <subcommand> [flags]
"""

import sys
from typing import List, Optional

from rich.console import Console

from cfshift.cli.commands import build_parser
from cfshift.exceptions.shift_exceptions import (
    CFShiftError,
    DimensionMismatchError,
    InvalidArgumentError,
    UnknownDomainError,
    UsageError,
)
from cfshift.config.logging_config import logger

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2

error_console = Console(stderr=True)


def main(argv: Optional[List[str]] = None) -> int:
    """
    Run one subcommand and return its exit code.

    0 on success, 2 for bad flags or unknown domains, 1 for parse,
    checkpoint and I/O failures. Dimension mismatches come from the
    files, not the flags, so they exit 1.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE

    logger.info("Command started", extra={"command": args.command})
    try:
        code = args.handler(args)
        logger.info("Command finished", extra={"command": args.command, "exit_code": code})
        return code
    except DimensionMismatchError as e:
        logger.error("Command failed", extra={"command": args.command, "error": str(e)})
        error_console.print(f"[red]error:[/red] {e}")
        return EXIT_RUNTIME
    except (UsageError, UnknownDomainError, InvalidArgumentError) as e:
        logger.error("Invalid invocation", extra={"command": args.command, "error": str(e)})
        error_console.print(f"[red]error:[/red] {e}")
        return EXIT_USAGE
    except (CFShiftError, OSError) as e:
        logger.error("Command failed", extra={"command": args.command, "error": str(e)})
        error_console.print(f"[red]error:[/red] {e}")
        return EXIT_RUNTIME
    except Exception as e:
        logger.exception("Unexpected error", extra={"command": args.command})
        error_console.print(f"[red]error:[/red] {e}")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
