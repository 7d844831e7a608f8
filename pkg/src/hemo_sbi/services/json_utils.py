"""Shared JSON serialization helpers."""

from __future__ import annotations

import json
import math
from enum import Enum
from pathlib import Path
from typing import Any

import numpy as np
from pydantic import BaseModel


def to_json_safe(value: Any) -> Any:
    """Convert a Python/numpy value to a JSON-serializable equivalent.

    Handles the types that end up in reports and manifests: numpy scalars
    and arrays, paths, enums, pydantic models, and nested containers.
    Non-finite floats become ``None`` so the output stays strict JSON.
    """
    if value is None:
        return None
    if isinstance(value, BaseModel):
        return to_json_safe(value.model_dump(mode="python"))
    if isinstance(value, Enum):
        return to_json_safe(value.value)
    if isinstance(value, Path):
        return value.as_posix()
    if isinstance(value, np.ndarray):
        return [to_json_safe(v) for v in value.tolist()]
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (np.floating, float)):
        f = float(value)
        return f if math.isfinite(f) else None
    if isinstance(value, dict):
        return {str(k): to_json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_json_safe(v) for v in value]
    if isinstance(value, bytes):
        return value.decode("utf-8", errors="replace")
    return value


def dumps(value: Any) -> str:
    """Serialize *value* as stable, sorted, indented JSON."""
    return json.dumps(to_json_safe(value), indent=2, sort_keys=True) + "\n"


def write_json(path: Path, value: Any) -> None:
    """Write *value* to *path* as JSON (parents created as needed)."""
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(value), encoding="utf-8")
