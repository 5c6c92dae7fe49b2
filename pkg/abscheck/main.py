import argparse
import json
import sys
from typing import Callable, Dict, List, Optional, Type

from pydantic import ValidationError

from abscheck import __version__
from abscheck.errors import AbsCheckError
from abscheck.routers import check, docalc, graph, model
from abscheck.routers.base import EXIT_INPUT, CommandResult, common_flags
from abscheck.utils.logs import get_logger, set_verbosity

logger = get_logger(__name__)


# --- Exception Handlers ---
def _validation_message(exc: ValidationError) -> str:
    first = exc.errors()[0]
    loc = ".".join(str(p) for p in first.get("loc", ())) or exc.title
    return f"invalid input at {loc}: {first.get('msg')}"


def _json_message(exc: json.JSONDecodeError) -> str:
    return f"malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}"


def _os_message(exc: OSError) -> str:
    return f"{exc.strerror or exc}: {exc.filename}" if exc.filename else str(exc)


_HANDLERS: Dict[Type[BaseException], Callable[[BaseException], str]] = {
    AbsCheckError: str,
    ValidationError: _validation_message,
    json.JSONDecodeError: _json_message,
    OSError: _os_message,
}


def _handle(exc: Exception) -> int:
    for kind, message in _HANDLERS.items():
        if isinstance(exc, kind):
            print(f"error: {message(exc)}", file=sys.stderr)
            return EXIT_INPUT
    # catch-all
    logger.debug("unexpected error", exc_info=exc)
    print(f"error: unexpected {type(exc).__name__}: {exc}", file=sys.stderr)
    return EXIT_INPUT


# --- Routers ---
def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="abscheck",
        description="Check causal abstractions between finite discrete causal Bayesian networks",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    common = common_flags()
    for router in (model, graph, check, docalc):
        router.register(sub, common)
    return parser


def _emit(result: CommandResult, output: str):
    if output == "json":
        print(json.dumps({"status": result.status, **result.data}, indent=2))
    else:
        for line in result.lines:
            print(line)


def cli_main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors and 0 on --help/--version
        return int(exc.code or 0)

    set_verbosity(getattr(args, "verbose", 0))
    try:
        result = args.handler(args)
    except Exception as exc:
        return _handle(exc)
    _emit(result, getattr(args, "output", "text"))
    return result.status


def main():
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
