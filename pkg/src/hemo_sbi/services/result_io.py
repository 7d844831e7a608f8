"""``HSR1`` binary and CSV writers for simulation results."""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
import pandas as pd

from hemo_sbi.core.exceptions import DatasetFormatError
from hemo_sbi.schemas.solver import SimulationResult

MAGIC = b"HSR1"
# magic, probe count, sample count, sample rate
_HEADER = struct.Struct("<4sIId")


def encode_result(result: SimulationResult) -> bytes:
    """Serialize *result*: little-endian header then float32 series per probe."""
    n_probes, n_samples = result.series.shape
    header = _HEADER.pack(MAGIC, n_probes, n_samples, float(result.sample_rate))
    payload = np.ascontiguousarray(result.series, dtype="<f4").tobytes()
    return header + payload


def decode_result(data: bytes) -> tuple[np.ndarray, float]:
    """Parse an ``HSR1`` blob into ``(series, sample_rate)``.

    Raises
    ------
    DatasetFormatError
        On a wrong magic or a truncated payload.
    """
    if len(data) < _HEADER.size:
        raise DatasetFormatError("Result file is shorter than its header")
    magic, n_probes, n_samples, rate = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise DatasetFormatError(f"Bad magic {magic!r}, expected {MAGIC!r}")
    expected = _HEADER.size + 4 * n_probes * n_samples
    if len(data) != expected:
        raise DatasetFormatError(f"Result payload has {len(data)} bytes, expected {expected}")
    series = np.frombuffer(data, dtype="<f4", offset=_HEADER.size).reshape(n_probes, n_samples)
    return series.astype(np.float64), float(rate)


def write_result(result: SimulationResult, path: Path, *, fmt: str = "binary") -> None:
    """Write *result* as ``HSR1`` binary or as CSV (one column per probe)."""
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "binary":
        path.write_bytes(encode_result(result))
        return
    if fmt == "csv":
        frame = pd.DataFrame(
            {name: result.series[i] for i, name in enumerate(result.probe_names)}
        )
        frame.insert(0, "time_s", result.start_time + np.arange(result.n_samples) / result.sample_rate)
        frame.to_csv(path, index=False, float_format="%.9g")
        return
    raise ValueError(f"Unknown result format '{fmt}'")


def read_result(path: Path) -> tuple[np.ndarray, float]:
    """Read an ``HSR1`` file written by :func:`write_result`."""
    return decode_result(path.read_bytes())
