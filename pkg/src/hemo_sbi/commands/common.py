"""Helpers shared by the subcommands: config files, argument types, output."""

from __future__ import annotations

import argparse
import json
import sys
import time
from collections.abc import Iterator
from contextlib import contextmanager
from pathlib import Path
from typing import Any, TypeVar

from pydantic import BaseModel, ValidationError

from hemo_sbi.core.exceptions import ConfigError
from hemo_sbi.schemas.network import ArterialNetwork
from hemo_sbi.services.json_utils import dumps
from hemo_sbi.services.network_io import load_network, load_reference_network

ModelT = TypeVar("ModelT", bound=BaseModel)


def read_json_file(path: Path) -> Any:
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"Cannot read {path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc


def load_config(path: Path | None, model: type[ModelT], *, default: ModelT | None = None) -> ModelT:
    """Validate a JSON config file against *model*; ``None`` gives the default."""
    if path is None:
        return default if default is not None else model()
    try:
        return model.model_validate(read_json_file(path))
    except ValidationError as exc:
        errors = "; ".join(
            f"{'.'.join(str(p) for p in e['loc']) or '<root>'}: {e['msg']}" for e in exc.errors()
        )
        raise ConfigError(f"{path}: {errors}") from exc


def network_or_reference(path: Path | None) -> ArterialNetwork:
    return load_network(path) if path is not None else load_reference_network()


def float_list(text: str) -> tuple[float, ...]:
    """argparse type for comma-separated floats."""
    try:
        return tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{text}'") from exc


def add_seed(parser: argparse.ArgumentParser, *, default: int | None = 0) -> None:
    parser.add_argument(
        "--seed", type=int, default=default, required=default is None, help="random seed (default: %(default)s)"
    )


def print_json(value: Any) -> None:
    """Command results go to stdout as JSON; logs stay on stderr."""
    sys.stdout.write(dumps(value))


def existing_inputs(*paths: Path | None) -> list[Path]:
    return [p for p in paths if p is not None]


@contextmanager
def stopwatch() -> Iterator[list[float]]:
    """Yields a one-element list filled with the elapsed seconds on exit."""
    box = [0.0]
    start = time.perf_counter()
    try:
        yield box
    finally:
        box[0] = time.perf_counter() - start
