"""Exception handling for the command line: exit codes and error lines."""

from __future__ import annotations

import logging
import sys
from collections.abc import Callable
from typing import TextIO

from pydantic import ValidationError

from hemo_sbi.core.exceptions import ConfigError, HemoError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_DOMAIN_ERROR = 1
EXIT_USAGE = 2


def error_line(*, module: str, code: str, message: str) -> str:
    """Build the single-line ``ERROR:<module>:<code> <message>`` envelope."""
    flat = " ".join(message.split())
    return f"ERROR:{module}:{code} {flat}"


def hemo_error_handler(exc: HemoError, stream: TextIO) -> int:
    """Handle toolkit errors."""
    logger.warning("HemoError [%s:%s]: %s", exc.module, exc.code, exc.message)
    print(error_line(module=exc.module, code=exc.code, message=exc.message), file=stream)
    return exc.exit_code


def validation_error_handler(exc: ValidationError, stream: TextIO) -> int:
    """Handle pydantic validation errors raised outside a config loader."""
    messages = []
    for err in exc.errors():
        loc = " -> ".join(str(part) for part in err["loc"])
        messages.append(f"{loc}: {err['msg']}")
    wrapped = ConfigError("; ".join(messages) or str(exc))
    return hemo_error_handler(wrapped, stream)


def unhandled_exception_handler(exc: Exception, stream: TextIO) -> int:
    """Log the traceback and print a terse error line."""
    logger.exception("Unhandled exception: %s", exc)
    print(
        error_line(module="cli", code="internal", message=f"{type(exc).__name__}: {exc}"),
        file=stream,
    )
    return EXIT_DOMAIN_ERROR


def run_with_handlers(func: Callable[[], int], *, stream: TextIO | None = None) -> int:
    """Run a command body and translate exceptions into exit codes."""
    out = stream if stream is not None else sys.stderr
    try:
        return func()
    except HemoError as exc:
        return hemo_error_handler(exc, out)
    except ValidationError as exc:
        return validation_error_handler(exc, out)
    except KeyboardInterrupt:
        print(error_line(module="cli", code="interrupted", message="interrupted"), file=out)
        return 130
    except Exception as exc:  # noqa: BLE001
        return unhandled_exception_handler(exc, out)
