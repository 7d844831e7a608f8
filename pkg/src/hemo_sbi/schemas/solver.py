"""Solver configuration, probe requests and simulation outputs."""

from __future__ import annotations

from dataclasses import dataclass
from enum import StrEnum

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from hemo_sbi.services.units import MMHG_TO_PA


class Limiter(StrEnum):
    """Slope limiter used by the MUSCL reconstruction."""

    MINMOD = "minmod"


class FluxScheme(StrEnum):
    """Approximate Riemann solver at interior faces."""

    HLL = "hll"
    LOCAL_LAX_FRIEDRICHS = "local-lax-friedrichs"


class ProbeQuantity(StrEnum):
    """Quantity recorded by a probe."""

    PRESSURE = "pressure"
    FLOW = "flow"
    AREA = "area"
    BED_VOLUME = "bed_volume"


class SolverConfig(BaseModel):
    """Discretization and run-length settings for one simulation."""

    model_config = ConfigDict(
        frozen=True,
        json_schema_extra={
            "examples": [
                {
                    "cells_per_segment_min": 8,
                    "cell_length": 0.02,
                    "cfl_number": 0.9,
                    "duration": 20.0,
                    "transient_beats_to_discard": 3,
                    "output_sample_rate": 125.0,
                    "limiter": "minmod",
                    "flux": "hll",
                }
            ]
        },
    )

    cells_per_segment_min: int = Field(default=8, ge=4)
    cell_length: float = Field(default=0.02, gt=0, description="target cell size, m")
    cfl_number: float = Field(default=0.9, gt=0, le=1)
    duration: float = Field(default=20.0, gt=0, description="s")
    transient_beats_to_discard: int = Field(default=3, ge=0)
    output_sample_rate: float = Field(default=125.0, gt=0)
    limiter: Limiter = Limiter.MINMOD
    flux: FluxScheme = FluxScheme.HLL
    periodicity_tolerance: float = Field(
        default=0.5 * MMHG_TO_PA,
        gt=0,
        description="beat-to-beat max root pressure change accepted as periodic, Pa",
    )
    stop_when_periodic: bool = True


class ProbeRequest(BaseModel):
    """Where and what to record."""

    model_config = ConfigDict(frozen=True)

    segment_id: str = Field(min_length=1)
    position: float = Field(default=1.0, ge=0, le=1, description="fraction of length")
    quantity: ProbeQuantity = ProbeQuantity.PRESSURE
    label: str | None = None

    @property
    def name(self) -> str:
        """Label used in result files."""
        if self.label:
            return self.label
        return f"{self.segment_id}@{self.position:g}:{self.quantity.value}"


class SimulationDiagnostics(BaseModel):
    """Convergence and conservation bookkeeping of a run."""

    converged: bool
    beats_simulated: int
    max_beat_pressure_change: float = Field(description="Pa, last two beats")
    beat_pressure_changes: tuple[float, ...] = Field(
        default=(), description="Pa, each beat against the previous one, from the second beat"
    )
    mass_drift: float = Field(description="relative to the initial volume")
    steps: int
    wall_time: float = 0.0


@dataclass(frozen=True)
class SimulationResult:
    """Uniformly sampled probe series of the retained beats."""

    probe_names: tuple[str, ...]
    series: np.ndarray  # (n_probes, n_samples)
    sample_rate: float
    period: float
    beat_boundaries: tuple[int, ...]
    diagnostics: SimulationDiagnostics
    start_time: float = 0.0

    def __post_init__(self) -> None:
        if self.series.ndim != 2 or self.series.shape[0] != len(self.probe_names):
            raise ValueError("series must be (n_probes, n_samples)")
        b = self.beat_boundaries
        if any(b2 <= b1 for b1, b2 in zip(b, b[1:])):
            raise ValueError("beat boundaries must be strictly increasing")

    @property
    def n_samples(self) -> int:
        return int(self.series.shape[1])

    def probe(self, name: str) -> np.ndarray:
        """Series recorded by the probe called *name*."""
        return self.series[self.probe_names.index(name)]

    def last_beat(self, name: str, n_points: int) -> np.ndarray:
        """Resample the final retained beat of probe *name* to *n_points*.

        The beat is treated as periodic so the first and last resampled
        points join smoothly when the beat is tiled.
        """
        start, stop = self.beat_boundaries[-2], self.beat_boundaries[-1]
        values = self.probe(name)[start:stop]
        # Sample times relative to the first retained beat onset
        t = np.arange(start, stop) / self.sample_rate
        beat_onset = (len(self.beat_boundaries) - 2) * self.period
        targets = beat_onset + np.arange(n_points) * (self.period / n_points)
        return np.interp(targets, t, values, period=self.period)
