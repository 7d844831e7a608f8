"""End-to-end pipeline configuration."""

from __future__ import annotations

from pathlib import Path

from pydantic import BaseModel, ConfigDict, Field, model_validator

from hemo_sbi.schemas.metrics import DEFAULT_LEVELS, DEFAULT_SNR_EDGES
from hemo_sbi.schemas.npe import TrainConfig
from hemo_sbi.schemas.population import AcceptanceFilter, PriorSpec
from hemo_sbi.schemas.signals import NoiseSpec
from hemo_sbi.schemas.solver import SolverConfig


class EvalConfig(BaseModel):
    """Settings of the evaluation stage."""

    model_config = ConfigDict(frozen=True)

    levels: tuple[float, ...] = DEFAULT_LEVELS
    n_samples: int = Field(default=1000, ge=1000)
    snr_edges: tuple[float, ...] = DEFAULT_SNR_EDGES
    split: str = "test"

    @model_validator(mode="after")
    def _valid(self) -> EvalConfig:
        if any(not 0 < a <= 1 for a in self.levels):
            raise ValueError("credibility levels must lie in (0, 1]")
        if self.split not in ("train", "validation", "test"):
            raise ValueError(f"unknown split '{self.split}'")
        return self


class PipelineConfig(BaseModel):
    """generate -> finalize -> train -> eval in one run.

    ``network`` is a path to a network file; ``None`` uses the bundled
    reference network.
    """

    model_config = ConfigDict(
        frozen=True,
        json_schema_extra={
            "examples": [
                {
                    "n_subjects": 64,
                    "seed": 1,
                    "train": {"epochs": 20},
                    "solver": {"duration": 8.0},
                }
            ]
        },
    )

    n_subjects: int = Field(gt=0)
    seed: int = 0
    chunk_size: int | None = Field(default=None, ge=1)
    network: Path | None = None
    prior: PriorSpec = PriorSpec()
    acceptance: AcceptanceFilter = AcceptanceFilter()
    solver: SolverConfig = SolverConfig()
    noise: NoiseSpec = NoiseSpec()
    train: TrainConfig = TrainConfig()
    evaluation: EvalConfig = EvalConfig()
