"""Little-endian container codec shared by model files and dataset chunks.

Layout::

    magic        4 bytes
    version      uint32
    header_len   uint32
    header       UTF-8 JSON (``header_len`` bytes)
    payload      concatenated little-endian arrays

The JSON header carries caller metadata under ``"meta"`` and an ``"arrays"``
table of ``{name, dtype, shape, offset, nbytes}`` entries, offsets relative
to the start of the payload.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Any

import numpy as np

from hemo_sbi.core.exceptions import HemoError
from hemo_sbi.services.json_utils import to_json_safe

_PREAMBLE = struct.Struct("<4sII")

# Supported payload dtypes, always stored little-endian (bytes have no order)
_DTYPES = {"<f4", "<f8", "<i4", "<i8", "|u1"}


def _le_dtype(arr: np.ndarray) -> np.dtype[Any]:
    dt = arr.dtype.newbyteorder("<")
    if dt.str not in _DTYPES:
        raise TypeError(f"Unsupported array dtype {arr.dtype}")
    return dt


def encode_container(
    magic: bytes,
    meta: dict[str, Any],
    arrays: dict[str, np.ndarray],
    *,
    version: int = 1,
) -> bytes:
    """Serialize *meta* and *arrays* into one container blob."""
    if len(magic) != 4:
        raise ValueError("magic must be exactly 4 bytes")
    table: list[dict[str, Any]] = []
    blobs: list[bytes] = []
    offset = 0
    for name, arr in arrays.items():
        a = np.ascontiguousarray(arr)
        dt = _le_dtype(a)
        raw = a.astype(dt, copy=False).tobytes()
        table.append(
            {"name": name, "dtype": dt.str, "shape": list(a.shape), "offset": offset, "nbytes": len(raw)}
        )
        blobs.append(raw)
        offset += len(raw)
    header = json.dumps(
        {"meta": to_json_safe(meta), "arrays": table}, sort_keys=True, separators=(",", ":")
    ).encode("utf-8")
    return _PREAMBLE.pack(magic, version, len(header)) + header + b"".join(blobs)


def decode_container(
    data: bytes,
    *,
    magic: bytes,
    versions: frozenset[int] = frozenset({1}),
    error: type[HemoError] = HemoError,
) -> tuple[int, dict[str, Any], dict[str, np.ndarray]]:
    """Parse a container blob into ``(version, meta, arrays)``.

    Every structural problem is reported as *error* so callers can pick
    the module-specific exception.
    """
    if len(data) < _PREAMBLE.size:
        raise error("File is too short for a container header")
    got_magic, version, header_len = _PREAMBLE.unpack_from(data, 0)
    if got_magic != magic:
        raise error(f"Bad magic {got_magic!r}, expected {magic!r}")
    if version not in versions:
        raise error(f"Unsupported format version {version}")
    start = _PREAMBLE.size
    payload_start = start + header_len
    if payload_start > len(data):
        raise error("Truncated container header")
    try:
        header = json.loads(data[start:payload_start].decode("utf-8"))
        table = header["arrays"]
        meta = header["meta"]
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise error(f"Corrupt container header: {exc}") from exc

    payload = memoryview(data)[payload_start:]
    arrays: dict[str, np.ndarray] = {}
    for entry in table:
        try:
            name = entry["name"]
            dt = np.dtype(entry["dtype"])
            shape = tuple(int(s) for s in entry["shape"])
            lo, n = int(entry["offset"]), int(entry["nbytes"])
        except (KeyError, TypeError, ValueError) as exc:
            raise error(f"Corrupt array table entry: {entry!r}") from exc
        if dt.str not in _DTYPES:
            raise error(f"Unsupported array dtype {dt.str} for '{name}'")
        if lo < 0 or lo + n > len(payload) or n != dt.itemsize * int(np.prod(shape, dtype=np.int64)):
            raise error(f"Array '{name}' does not fit the payload")
        arrays[name] = np.frombuffer(payload[lo : lo + n], dtype=dt).reshape(shape).copy()
    return int(version), meta, arrays


def write_container(
    path: Path,
    magic: bytes,
    meta: dict[str, Any],
    arrays: dict[str, np.ndarray],
    *,
    version: int = 1,
) -> None:
    """Write a container atomically (temp file, then rename)."""
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(encode_container(magic, meta, arrays, version=version))
    tmp.replace(path)


def read_container(
    path: Path,
    *,
    magic: bytes,
    versions: frozenset[int] = frozenset({1}),
    error: type[HemoError] = HemoError,
) -> tuple[int, dict[str, Any], dict[str, np.ndarray]]:
    """Read a container written by :func:`write_container`."""
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise error(f"Cannot read {path}: {exc}") from exc
    return decode_container(data, magic=magic, versions=versions, error=error)
