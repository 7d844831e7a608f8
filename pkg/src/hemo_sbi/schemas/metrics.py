"""Evaluation report schemas."""

from __future__ import annotations

from pydantic import BaseModel, Field

from hemo_sbi.schemas.signals import Modality

SCI_CELLS = 100
DEFAULT_LEVELS: tuple[float, ...] = (0.68, 0.95)
DEFAULT_SNR_EDGES: tuple[float, ...] = (-10.0, 0.0, 10.0, 20.0, 30.0, 100.0)


class SnrBinMetrics(BaseModel):
    """Point and calibration errors of one SNR bin."""

    low_db: float
    high_db: float
    count: int
    mae: float | None = None
    acauc: float | None = None
    sci: dict[str, float | None] = Field(default_factory=dict)


class StdGatingPoint(BaseModel):
    """MAE of the predictions whose posterior std is below ``threshold``."""

    kept_fraction: float
    threshold: float
    count: int
    mae: float | None


class BiomarkerReport(BaseModel):
    """Metrics of one biomarker."""

    unit: str
    mae: float
    rae: float
    acauc: float = Field(ge=0, le=0.5)
    sci: dict[str, float] = Field(description="credibility level -> mean region size, physical units")
    sci_cells: dict[str, float] = Field(default_factory=dict)
    grid_low: float
    grid_high: float
    spearman: list[float] = Field(default_factory=list)
    snr_bins: list[SnrBinMetrics] = Field(default_factory=list)
    std_gating: list[StdGatingPoint] = Field(default_factory=list)


class CalibrationReport(BaseModel):
    """Per-biomarker evaluation of a posterior estimator on held-out data."""

    modality: Modality
    n_pairs: int
    n_samples: int
    levels: tuple[float, ...] = DEFAULT_LEVELS
    cells: int = SCI_CELLS
    snr_edges: tuple[float, ...] = DEFAULT_SNR_EDGES
    biomarkers: dict[str, BiomarkerReport]
