"""Pydantic models for networks, priors, configs and reports."""

from __future__ import annotations

from hemo_sbi.schemas.dataset import DatasetMetadata, SplitIndices
from hemo_sbi.schemas.metrics import BiomarkerReport, CalibrationReport
from hemo_sbi.schemas.network import (
    ArterialNetwork,
    ArterySegment,
    BloodProperties,
    HeartFunction,
    WindkesselBed,
)
from hemo_sbi.schemas.npe import TrainConfig
from hemo_sbi.schemas.pipeline import EvalConfig, PipelineConfig
from hemo_sbi.schemas.population import AcceptanceFilter, PriorSpec, VirtualSubject
from hemo_sbi.schemas.signals import Modality, NoiseSpec
from hemo_sbi.schemas.solver import ProbeRequest, SimulationResult, SolverConfig

__all__ = [
    "AcceptanceFilter",
    "ArterialNetwork",
    "ArterySegment",
    "BiomarkerReport",
    "BloodProperties",
    "CalibrationReport",
    "DatasetMetadata",
    "EvalConfig",
    "HeartFunction",
    "Modality",
    "NoiseSpec",
    "PipelineConfig",
    "PriorSpec",
    "ProbeRequest",
    "SimulationResult",
    "SolverConfig",
    "SplitIndices",
    "TrainConfig",
    "VirtualSubject",
    "WindkesselBed",
]
