"""Tests for simulation result files."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from hemo_sbi.core.exceptions import DatasetFormatError
from hemo_sbi.schemas.solver import SimulationDiagnostics, SimulationResult
from hemo_sbi.services.result_io import MAGIC, decode_result, encode_result, read_result, write_result


def _result() -> SimulationResult:
    series = np.vstack([np.linspace(0.0, 1.0, 10), np.arange(10.0)])
    return SimulationResult(
        probe_names=("p", "q"),
        series=series,
        sample_rate=125.0,
        period=0.04,
        beat_boundaries=(0, 5, 10),
        diagnostics=SimulationDiagnostics(
            converged=True, beats_simulated=2, max_beat_pressure_change=0.0, mass_drift=0.0, steps=10
        ),
        start_time=1.0,
    )


class TestBinary:
    """``HSR1`` layout."""

    def test_header_and_size(self) -> None:
        blob = encode_result(_result())
        assert blob[:4] == MAGIC
        assert len(blob) == 4 + 4 + 4 + 8 + 2 * 10 * 4

    def test_decode(self) -> None:
        series, rate = decode_result(encode_result(_result()))
        assert rate == 125.0
        assert series.shape == (2, 10)
        assert np.allclose(series, _result().series, atol=1e-6)

    def test_bad_magic(self) -> None:
        blob = b"XXXX" + encode_result(_result())[4:]
        with pytest.raises(DatasetFormatError, match="Bad magic"):
            decode_result(blob)

    def test_truncated(self) -> None:
        with pytest.raises(DatasetFormatError):
            decode_result(encode_result(_result())[:-4])
        with pytest.raises(DatasetFormatError):
            decode_result(b"HSR1")


class TestFiles:
    """Binary and CSV outputs."""

    def test_binary_file(self, tmp_path: Path) -> None:
        path = tmp_path / "out" / "run.hsr"
        write_result(_result(), path)
        series, _ = read_result(path)
        assert series[1, -1] == 9.0

    def test_csv_file(self, tmp_path: Path) -> None:
        path = tmp_path / "run.csv"
        write_result(_result(), path, fmt="csv")
        frame = pd.read_csv(path)
        assert list(frame.columns) == ["time_s", "p", "q"]
        assert frame["time_s"].iloc[0] == pytest.approx(1.0)
        assert frame["time_s"].iloc[1] == pytest.approx(1.008)
        assert frame["q"].tolist() == list(np.arange(10.0))

    def test_unknown_format(self, tmp_path: Path) -> None:
        with pytest.raises(ValueError):
            write_result(_result(), tmp_path / "x", fmt="parquet")


class TestResult:
    """Result container helpers."""

    def test_probe_lookup_and_last_beat(self) -> None:
        res = _result()
        assert np.array_equal(res.probe("q"), np.arange(10.0))
        beat = res.last_beat("q", 5)
        assert np.allclose(beat, [5.0, 6.0, 7.0, 8.0, 9.0])

    def test_boundaries_must_increase(self) -> None:
        with pytest.raises(ValueError):
            SimulationResult(
                probe_names=("p",),
                series=np.zeros((1, 4)),
                sample_rate=125.0,
                period=0.016,
                beat_boundaries=(0, 2, 2),
                diagnostics=_result().diagnostics,
            )
