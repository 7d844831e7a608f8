"""Encoder, flow and training configuration of the posterior estimator."""

from __future__ import annotations

from enum import StrEnum

from pydantic import BaseModel, ConfigDict, Field, model_validator

from hemo_sbi.schemas.dataset import DEFAULT_SPLIT
from hemo_sbi.schemas.population import BIOMARKERS
from hemo_sbi.schemas.signals import SEGMENT_LENGTH, Modality


class Precision(StrEnum):
    FLOAT32 = "float32"
    FLOAT64 = "float64"


class ConvLayer(BaseModel):
    """One unpadded 1-D convolution followed by ReLU."""

    model_config = ConfigDict(frozen=True)

    channels: int = Field(gt=0)
    kernel_size: int = Field(default=3, gt=0)
    stride: int = Field(default=2, gt=0)


class EncoderConfig(BaseModel):
    """Convolutional embedding of a segment.

    Three convolutions, a max-pool, then two more convolutions; no padding
    anywhere. On a 1000-sample input the lengths go
    1000 -> 499 -> 249 -> 124 -> 41 -> 20 -> 9, giving 9 x 10 = 90 features.
    """

    model_config = ConfigDict(frozen=True)

    input_length: int = SEGMENT_LENGTH
    head: tuple[ConvLayer, ...] = (ConvLayer(channels=40), ConvLayer(channels=40), ConvLayer(channels=40))
    pool_kernel: int = Field(default=3, gt=0)
    pool_stride: int = Field(default=3, gt=0)
    tail: tuple[ConvLayer, ...] = (ConvLayer(channels=20), ConvLayer(channels=10))
    age_mean: float = 50.0
    age_scale: float = Field(default=25.0, gt=0)

    def lengths(self) -> list[int]:
        """Sequence length after each layer, starting with the input."""
        out = [self.input_length]
        for layer in self.head:
            out.append((out[-1] - layer.kernel_size) // layer.stride + 1)
        out.append((out[-1] - self.pool_kernel) // self.pool_stride + 1)
        for layer in self.tail:
            out.append((out[-1] - layer.kernel_size) // layer.stride + 1)
        return out

    @property
    def embedding_size(self) -> int:
        last = self.tail[-1].channels if self.tail else self.head[-1].channels
        return self.lengths()[-1] * last

    @property
    def context_size(self) -> int:
        """Embedding plus the normalized age."""
        return self.embedding_size + 1

    @model_validator(mode="after")
    def _positive_lengths(self) -> EncoderConfig:
        if not self.head:
            raise ValueError("encoder needs at least one convolution before the pool")
        if min(self.lengths()) < 1:
            raise ValueError(f"input_length {self.input_length} is too short for the layer stack")
        return self


class FlowConfig(BaseModel):
    """Conditional masked autoregressive flow over the biomarkers."""

    model_config = ConfigDict(frozen=True)

    features: int = Field(default=len(BIOMARKERS), gt=0)
    steps: int = Field(default=3, gt=0)
    hidden_features: int = Field(default=350, gt=0)
    hidden_layers: int = Field(default=3, gt=0)
    scale_clamp: float = Field(default=7.0, gt=0, description="bound on raw log-scales")


class TrainConfig(BaseModel):
    """Optimizer and model-selection settings."""

    model_config = ConfigDict(frozen=True)

    modality: Modality = Modality.APW
    learning_rate: float = Field(default=1e-3, gt=0)
    weight_decay: float = Field(default=1e-6, ge=0)
    batch_size: int = Field(default=100, gt=0)
    epochs: int = Field(default=500, gt=0)
    split: tuple[float, float, float] = DEFAULT_SPLIT
    patience: int | None = Field(default=None, gt=0, description="epochs without improvement")
    precision: Precision = Precision.FLOAT32
    encoder: EncoderConfig = EncoderConfig()
    flow: FlowConfig = FlowConfig()

    @model_validator(mode="after")
    def _split_sums_to_one(self) -> TrainConfig:
        if any(f < 0 for f in self.split) or abs(sum(self.split) - 1.0) > 1e-9:
            raise ValueError(f"split fractions must be non-negative and sum to 1, got {self.split}")
        return self


class NormalizationStats(BaseModel):
    """Training-set statistics applied at inference."""

    model_config = ConfigDict(frozen=True)

    theta_mean: tuple[float, ...]
    theta_std: tuple[float, ...]
    signal_mean: float
    signal_std: float = Field(gt=0)

    @model_validator(mode="after")
    def _consistent(self) -> NormalizationStats:
        if len(self.theta_mean) != len(self.theta_std):
            raise ValueError("theta_mean and theta_std lengths differ")
        if any(s <= 0 for s in self.theta_std):
            raise ValueError("theta_std entries must be positive")
        return self

    @classmethod
    def identity(cls, features: int = len(BIOMARKERS)) -> NormalizationStats:
        return cls(
            theta_mean=(0.0,) * features, theta_std=(1.0,) * features, signal_mean=0.0, signal_std=1.0
        )
