"""Unit conversion to SI for network and heart-function configuration."""

from __future__ import annotations

import math
from typing import Any

from hemo_sbi.core.exceptions import NetworkConfigError

MMHG_TO_PA = 133.322387415
ML_TO_M3 = 1e-6

# Suffix -> multiplier to the SI unit of the same dimension
_SUFFIXES: dict[str, float] = {
    "m": 1.0,
    "cm": 1e-2,
    "mm": 1e-3,
    "um": 1e-6,
    "pa": 1.0,
    "kpa": 1e3,
    "mpa": 1e6,
    "mmhg": MMHG_TO_PA,
    "m3": 1.0,
    "ml": ML_TO_M3,
    "s": 1.0,
    "ms": 1e-3,
    "pa_s": 1.0,
    "pa_s_m3": 1.0,
    "mmhg_s_ml": MMHG_TO_PA / ML_TO_M3,
    "m3_pa": 1.0,
    "ml_mmhg": ML_TO_M3 / MMHG_TO_PA,
    "kg_m3": 1.0,
    "g_cm3": 1e3,
    "cp": 1e-3,
    "bpm": 1.0,
}

# Longest suffixes first so "mmhg_s_ml" wins over "ml"
_ORDERED = sorted(_SUFFIXES, key=len, reverse=True)


def mmhg_to_pa(value: float) -> float:
    """Convert millimetres of mercury to pascals."""
    return value * MMHG_TO_PA


def pa_to_mmhg(value: float) -> float:
    """Convert pascals to millimetres of mercury."""
    return value / MMHG_TO_PA


def split_suffix(key: str) -> tuple[str, float]:
    """Split ``length_mm`` into ``("length", 1e-3)``.

    Keys without a recognised suffix are returned unchanged with factor 1.
    """
    lowered = key.lower()
    for suffix in _ORDERED:
        tail = "_" + suffix
        if lowered.endswith(tail) and len(lowered) > len(tail):
            return key[: -len(tail)], _SUFFIXES[suffix]
    return key, 1.0


def convert_fields(raw: dict[str, Any], *, passthrough: frozenset[str]) -> dict[str, Any]:
    """Convert unit-suffixed numeric keys of *raw* to SI field names.

    Parameters
    ----------
    raw:
        One JSON object from a network file.
    passthrough:
        Keys copied verbatim (identifiers, lists, names).

    Raises
    ------
    NetworkConfigError
        If a field is given twice in different units or is not a finite number.
    """
    out: dict[str, Any] = {}
    for key, value in raw.items():
        if key in passthrough:
            out[key] = value
            continue
        name, factor = split_suffix(key)
        if name in out:
            raise NetworkConfigError(f"Field '{name}' given more than once ('{key}')")
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise NetworkConfigError(f"Field '{key}' must be a number, got {value!r}")
        si = float(value) * factor
        if not math.isfinite(si):
            raise NetworkConfigError(f"Field '{key}' is not finite")
        out[name] = si
    return out
