"""Command-line entry point for the lexical complexity toolkit."""

import argparse
import json
import logging
import os
import sys
from typing import Any, Dict, Optional, Sequence

from . import __version__
from .commands import COMMANDS
from .utils.errors import EXIT_USAGE, LCPError

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

_SCALAR_TYPES = {"string": str, "integer": int, "number": float}


class _Parser(argparse.ArgumentParser):
    """argparse with usage errors mapped to exit code 1."""

    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_argument(parser: argparse.ArgumentParser, name: str, spec: Dict[str, Any]) -> None:
    flag = "--" + name.replace("_", "-")
    kind = spec.get("type", "string")
    kwargs: Dict[str, Any] = {"dest": name, "help": spec.get("description")}

    if kind == "boolean":
        kwargs.update(action="store_true", default=None)
    elif kind.startswith("list["):
        kwargs.update(nargs="+", type=_SCALAR_TYPES[kind[5:-1]], default=spec.get("default"))
    else:
        kwargs.update(type=_SCALAR_TYPES[kind], default=spec.get("default"))
    if "enum" in spec:
        kwargs["choices"] = spec["enum"]
    if spec.get("required"):
        kwargs["required"] = True
    parser.add_argument(flag, **kwargs)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lcp-toolkit", description="Lexical complexity prediction toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--debug", help="Enable debug logging", action="store_true")
    subparsers = parser.add_subparsers(dest="command", metavar="COMMAND")
    subparsers.required = True

    for name, (definition, _) in COMMANDS.items():
        sub = subparsers.add_parser(name, help=definition["description"])
        for argument, spec in definition["arguments"].items():
            _add_argument(sub, argument, spec)
    return parser


def configure_logging(debug: bool = False) -> None:
    level_name = "DEBUG" if debug else os.getenv("LCP_LOG_LEVEL", "INFO").upper()
    level = getattr(logging, level_name, logging.INFO)
    logging.basicConfig(
        level=level,
        format=LOG_FORMAT,
        handlers=[logging.StreamHandler(sys.stderr)],
        force=True,
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Run one command and return its exit code.

    Exit codes: 0 success, 1 usage or configuration error, 2 data or
    validation error, 3 numeric failure.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    configure_logging(args.debug)
    if args.debug:
        logger.info("Debug logging enabled")

    arguments = {k: v for k, v in vars(args).items() if k not in ("command", "debug")}
    _, handler = COMMANDS[args.command]
    try:
        result = handler(arguments)
    except LCPError as e:
        logger.error(f"{args.command} failed: {e.message}")
        print(json.dumps(e.to_dict(), default=str), file=sys.stderr)
        return e.exit_code
    except KeyboardInterrupt:
        logger.info("Received interrupt signal, stopping")
        return EXIT_USAGE

    print(json.dumps(result, indent=2, default=str))
    return 0


if __name__ == "__main__":
    sys.exit(main())
