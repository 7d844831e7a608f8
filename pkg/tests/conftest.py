"""Shared factories and constants for the hemo-sbi test suite."""

from __future__ import annotations

import math
from collections.abc import Callable, Iterable
from typing import Any

import numpy as np
import pytest

from hemo_sbi.core.config import settings
from hemo_sbi.main import dispatch
from hemo_sbi.schemas.dataset import SplitIndices
from hemo_sbi.schemas.network import (
    ArterialNetwork,
    ArterySegment,
    BloodProperties,
    HeartFunction,
    WindkesselBed,
)
from hemo_sbi.schemas.npe import EncoderConfig, FlowConfig, TrainConfig
from hemo_sbi.schemas.population import VirtualSubject
from hemo_sbi.schemas.signals import SEGMENT_LENGTH
from hemo_sbi.schemas.solver import SolverConfig
from hemo_sbi.services.dataset_store import SegmentDataset
from hemo_sbi.services.population import PopulationBatch, SubjectRecord
from hemo_sbi.services.signal_pipeline import beat_length

# ---------------------------------------------------------------------------
# Keep unit tests single-process and reproducible regardless of the caller's
# environment.
# ---------------------------------------------------------------------------
settings.threads = 1

RADIUS = 5e-3
THICKNESS = 5e-4
MODULUS = 4e5
DENSITY = 1060.0


# ---------------------------------------------------------------------------
# Network factories
# ---------------------------------------------------------------------------


def make_segment(
    sid: str = "vessel",
    *,
    length: float = 0.2,
    proximal_radius: float = RADIUS,
    distal_radius: float | None = None,
    wall_viscosity: float = 0.0,
    children: tuple[str, ...] = (),
    terminal_bed: str | None = "bed",
) -> ArterySegment:
    """Straight (or tapered) segment with the default wall."""
    return ArterySegment(
        id=sid,
        length=length,
        proximal_radius=proximal_radius,
        distal_radius=proximal_radius if distal_radius is None else distal_radius,
        wall_thickness=THICKNESS,
        elastic_modulus=MODULUS,
        wall_viscosity=wall_viscosity,
        children=children,
        terminal_bed=None if children else terminal_bed,
    )


def reference_wave_speed(radius: float = RADIUS) -> float:
    """``c0`` of a default segment at its reference area."""
    a0 = math.pi * radius * radius
    beta = (4.0 / 3.0) * math.sqrt(math.pi) * MODULUS * THICKNESS / a0
    return math.sqrt(beta * math.sqrt(a0) / (2.0 * DENSITY))


def matched_bed(bid: str = "bed", *, radius: float = RADIUS, outflow_pressure: float = 0.0) -> WindkesselBed:
    """RCR bed whose R1 equals the characteristic impedance of a default segment."""
    a0 = math.pi * radius * radius
    z = DENSITY * reference_wave_speed(radius) / a0
    return WindkesselBed(
        id=bid,
        proximal_resistance=z,
        distal_resistance=1.2e8,
        compliance=1e-8,
        outflow_pressure=outflow_pressure,
    )


def single_vessel_network(
    *, wall_viscosity: float = 0.0, dynamic_viscosity: float = 0.004, length: float = 0.2
) -> ArterialNetwork:
    """One straight vessel terminated by a matched Windkessel bed."""
    seg = make_segment(length=length, wall_viscosity=wall_viscosity)
    return ArterialNetwork(
        segments={seg.id: seg},
        root=seg.id,
        beds={"bed": matched_bed()},
        blood=BloodProperties(density=DENSITY, dynamic_viscosity=dynamic_viscosity),
    )


def closed_vessel_network(length: float = 1.0) -> ArterialNetwork:
    """Inviscid straight vessel with reflecting walls at both ends."""
    seg = make_segment(length=length, terminal_bed=None)
    return ArterialNetwork(
        segments={seg.id: seg},
        root=seg.id,
        blood=BloodProperties(density=DENSITY, dynamic_viscosity=0.0),
    )


def bifurcation_network() -> ArterialNetwork:
    """Parent splitting into two identical daughters, each with a bed."""
    parent = make_segment("parent", children=("left", "right"))
    left = make_segment("left", proximal_radius=0.8 * RADIUS, terminal_bed="left_bed")
    right = make_segment("right", proximal_radius=0.8 * RADIUS, terminal_bed="right_bed")
    return ArterialNetwork(
        segments={s.id: s for s in (parent, left, right)},
        root="parent",
        beds={
            "left_bed": matched_bed("left_bed", radius=0.8 * RADIUS),
            "right_bed": matched_bed("right_bed", radius=0.8 * RADIUS),
        },
        blood=BloodProperties(density=DENSITY),
    )


def make_heart_function(
    *,
    heart_rate: float = 75.0,
    stroke_volume_ml: float = 20.0,
    lvet: float = 0.3,
    peak_flow_time: float = 0.1,
    reverse_flow_fraction: float = 0.0,
) -> HeartFunction:
    return HeartFunction(
        heart_rate=heart_rate,
        stroke_volume=stroke_volume_ml * 1e-6,
        lvet=lvet,
        peak_flow_time=peak_flow_time,
        reverse_flow_fraction=reverse_flow_fraction,
    )


def fast_solver_config(**overrides: object) -> SolverConfig:
    """Coarse grid and short run for unit tests."""
    values: dict[str, object] = {
        "cells_per_segment_min": 8,
        "cell_length": 0.02,
        "duration": 4.0,
        "transient_beats_to_discard": 1,
    }
    values.update(overrides)
    return SolverConfig.model_validate(values)


# ---------------------------------------------------------------------------
# Population / dataset factories
# ---------------------------------------------------------------------------


def make_subject(subject_id: int = 0, *, heart_rate: float = 75.0, age: float = 50.0) -> VirtualSubject:
    return VirtualSubject(
        subject_id=subject_id,
        heart_rate=heart_rate,
        stroke_volume_ml=70.0,
        lvet_ms=300.0,
        peak_flow_time=0.1,
        reverse_flow_fraction=0.02,
        height_cm=170.0,
        height_noise_cm=0.0,
        age=age,
        lvet_offset_ms=0.0,
        lvet_hr_noise=0.0,
        lvet_sv_noise=0.0,
        bed_resistance_scale=1.0,
        measurement_site="left_radial",
        probe_position=0.5,
        rng_seed=(0, subject_id),
        svr=1.3e8,
    )


def make_record(subject_id: int = 0, *, heart_rate: float = 75.0) -> SubjectRecord:
    """Clean single-beat record with a smooth synthetic pulse."""
    n = beat_length(heart_rate)
    phase = np.arange(n) / n
    pulse = np.exp(-((phase - 0.2) ** 2) / 0.005) + 0.3 * np.exp(-((phase - 0.5) ** 2) / 0.01)
    apw = 80.0 + 40.0 * pulse
    ppg = (pulse - pulse.min()) / (pulse.max() - pulse.min())
    return SubjectRecord(
        subject=make_subject(subject_id, heart_rate=heart_rate),
        apw_beat=apw,
        ppg_beat=ppg,
        sbp=float(apw.max()),
        dbp=float(apw.min()),
    )


class FakePopulation:
    """Stands in for batch simulation: odd indices are rejected.

    Records the index lists it was asked for so tests can check chunking
    and resumption.
    """

    def __init__(self) -> None:
        self.calls: list[list[int]] = []

    def __call__(self, indices: Iterable[int], *args: Any, **kwargs: Any) -> PopulationBatch:
        idx = list(indices)
        self.calls.append(idx)
        records = [make_record(i, heart_rate=60.0 + i) for i in idx if i % 2 == 0]
        return PopulationBatch(records=records, attempted=len(idx), rejected=len(idx) - len(records))


def make_segment_dataset(n: int = 60, seed: int = 0, *, split: bool = True) -> SegmentDataset:
    """Synthetic segments whose shape depends on the biomarkers.

    The heart rate sets the pulse frequency and the cardiac output its
    amplitude, so a trained estimator has something to learn.
    """
    rng = np.random.default_rng(seed)
    hr = rng.uniform(50.0, 110.0, n)
    co = rng.uniform(3.0, 8.0, n)
    svr = rng.uniform(1.0e8, 2.0e8, n)
    lvet = rng.uniform(250.0, 350.0, n)
    t = np.arange(SEGMENT_LENGTH) / 125.0
    apw = co[:, None] * np.sin(2.0 * np.pi * hr[:, None] / 60.0 * t[None, :])
    apw += 0.05 * rng.standard_normal(apw.shape)
    ppg = np.sin(2.0 * np.pi * hr[:, None] / 60.0 * t[None, :] - 0.5)
    n_train, n_val = int(0.7 * n), int(0.1 * n)
    return SegmentDataset(
        apw=apw.astype(np.float32),
        ppg=ppg.astype(np.float32),
        biomarkers=np.stack([hr, co, svr, lvet], axis=1),
        age=rng.uniform(25.0, 75.0, n),
        subject_id=np.arange(n, dtype=np.int64) // 3,
        snr_apw=rng.uniform(-5.0, 40.0, n),
        snr_ppg=rng.uniform(-5.0, 40.0, n),
        flipped_apw=np.zeros(n, dtype=bool),
        flipped_ppg=np.zeros(n, dtype=bool),
        split=SplitIndices(
            train=list(range(n_train)),
            validation=list(range(n_train, n_train + n_val)),
            test=list(range(n_train + n_val, n)),
        )
        if split
        else None,
    )


def tiny_train_config(**overrides: object) -> TrainConfig:
    """Small flow and few epochs; the encoder keeps its real layer stack."""
    values: dict[str, object] = {
        "epochs": 2,
        "batch_size": 16,
        "encoder": EncoderConfig().model_dump(),
        "flow": FlowConfig(hidden_features=16, hidden_layers=2).model_dump(),
    }
    values.update(overrides)
    return TrainConfig.model_validate(values)


@pytest.fixture()
def segment_dataset() -> SegmentDataset:
    return make_segment_dataset()


@pytest.fixture()
def run_cli(capsys: pytest.CaptureFixture[str]) -> Callable[..., tuple[int, str, str]]:
    """Run ``hemo`` in-process; returns ``(exit_code, stdout, stderr)``."""

    def _run(*argv: str) -> tuple[int, str, str]:
        code = dispatch(list(argv))
        captured = capsys.readouterr()
        return code, captured.out, captured.err

    return _run
