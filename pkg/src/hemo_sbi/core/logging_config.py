"""Structured logging configuration for the ``hemo`` commands."""

from __future__ import annotations

import logging
import sys
from typing import TextIO

# Third-party loggers that are chatty at INFO/DEBUG
_QUIET_LOGGERS = ("matplotlib", "PIL", "torch")


class StderrHandler(logging.StreamHandler):  # type: ignore[type-arg]
    """Stream handler bound to whatever ``sys.stderr`` is when a record is emitted."""

    @property
    def stream(self) -> TextIO:
        return sys.stderr

    @stream.setter
    def stream(self, value: TextIO) -> None:
        pass


def setup_logging(*, level: int | None = None) -> None:
    """Configure structured logging for the command-line tools.

    Log lines include timestamp, level, logger name, and message. They go to
    stderr so that commands printing JSON results keep stdout clean.

    If *level* is ``None`` (default), reads ``settings.log_level``
    (``HEMO_LOG_LEVEL``).
    """
    if level is None:
        from hemo_sbi.core.config import settings

        level = logging.getLevelNamesMapping().get(
            settings.log_level.upper(), logging.INFO
        )

    root = logging.getLogger()
    root.setLevel(level)
    for name in _QUIET_LOGGERS:
        logging.getLogger(name).setLevel(max(level, logging.WARNING))

    # Avoid duplicate handlers on repeated calls (e.g. tests)
    if root.handlers:
        return
    handler = StderrHandler()
    handler.setFormatter(
        logging.Formatter(
            fmt="%(asctime)s %(levelname)s [%(name)s] %(message)s",
            datefmt="%Y-%m-%dT%H:%M:%S",
        )
    )
    root.addHandler(handler)
