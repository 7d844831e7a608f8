"""Waveform segments and the measurement-noise model."""

from __future__ import annotations

from dataclasses import dataclass
from enum import StrEnum

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from hemo_sbi.schemas.population import UniformRange

SEGMENT_LENGTH = 1000
SAMPLE_RATE = 125.0

# Reported when the added noise has zero power
SNR_SATURATION_DB = 100.0


class Modality(StrEnum):
    """Biosignal type."""

    APW = "apw"
    PPG = "ppg"


class NoiseMode(StrEnum):
    """How noise is applied when a dataset is finalized.

    ``none`` keeps clean signals, ``stochastic`` draws noise per segment,
    ``fixed`` applies full-length Gaussian and red noise at
    ``fixed_intensity`` to every segment without flipping.
    """

    NONE = "none"
    STOCHASTIC = "stochastic"
    FIXED = "fixed"


class NoiseSpec(BaseModel):
    """Parameters of the stochastic measurement model."""

    model_config = ConfigDict(frozen=True)

    mode: NoiseMode = NoiseMode.STOCHASTIC
    p_additive: float = Field(default=0.8, ge=0, le=1)
    p_flip: float = Field(default=0.3, ge=0, le=1)
    gaussian_intensity_mean: float = Field(
        default=0.1, gt=0, description="mean of the exponential intensity, x segment std"
    )
    red_intensity_mean: float = Field(default=0.1, gt=0)
    red_noise_coefficient: float = Field(default=0.95, ge=0, lt=1)
    window_fraction: UniformRange = UniformRange(low=0.25, high=1.0)
    fixed_intensity: float = Field(default=0.3, gt=0)

    @model_validator(mode="after")
    def _window_in_unit_interval(self) -> NoiseSpec:
        if self.window_fraction.low <= 0 or self.window_fraction.high > 1:
            raise ValueError("window_fraction must lie within (0, 1]")
        return self


class NoisePlan(BaseModel):
    """Random choices of one noise application, before any noise is drawn."""

    additive: bool
    flipped: bool
    gaussian_intensity: float = 0.0
    red_intensity: float = 0.0
    window_start: int = 0
    window_stop: int = 0


class NoiseRecord(NoisePlan):
    """A :class:`NoisePlan` plus the absolute noise levels that resulted."""

    gaussian_sigma: float = 0.0
    red_sigma: float = 0.0
    snr_db: float = SNR_SATURATION_DB


@dataclass(frozen=True, eq=False)
class WaveformSegment:
    """An 8 s, 125 Hz biosignal excerpt with provenance."""

    samples: np.ndarray
    modality: Modality
    subject_id: int = -1
    crop_offset: int = 0
    noise_record: NoiseRecord | None = None
    sample_rate: float = SAMPLE_RATE

    def __post_init__(self) -> None:
        if self.samples.shape != (SEGMENT_LENGTH,):
            raise ValueError(
                f"A segment holds exactly {SEGMENT_LENGTH} samples, got {self.samples.shape}"
            )
        if self.sample_rate != SAMPLE_RATE:
            raise ValueError(f"Segments are sampled at {SAMPLE_RATE} Hz")
