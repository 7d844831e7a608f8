"""Dataset directory metadata."""

from __future__ import annotations

from enum import StrEnum
from typing import Any

from pydantic import BaseModel, ConfigDict, Field, model_validator

from hemo_sbi.schemas.population import AcceptanceFilter, PriorSpec
from hemo_sbi.schemas.signals import NoiseSpec
from hemo_sbi.schemas.solver import SolverConfig

DEFAULT_SPLIT: tuple[float, float, float] = (0.7, 0.1, 0.2)


class DatasetKind(StrEnum):
    """Stage of a dataset directory."""

    CLEAN = "clean"  # single clean beats per accepted subject
    SEGMENTS = "segments"  # cropped, noisy, band-passed 1000-sample segments


class ChunkInfo(BaseModel):
    """One chunk file of a dataset directory."""

    index: int = Field(ge=0)
    file: str
    first_subject: int = Field(ge=0)
    stop_subject: int = Field(ge=0, description="exclusive")
    records: int = Field(ge=0)
    sha256: str
    attempted: int = 0
    rejected: int = 0
    failed: int = 0


class SplitIndices(BaseModel):
    """Row indices of the train/validation/test partition."""

    fractions: tuple[float, float, float] = DEFAULT_SPLIT
    seed: int = 0
    train: list[int] = Field(default_factory=list)
    validation: list[int] = Field(default_factory=list)
    test: list[int] = Field(default_factory=list)

    @model_validator(mode="after")
    def _fractions_sum_to_one(self) -> SplitIndices:
        if any(f < 0 for f in self.fractions) or abs(sum(self.fractions) - 1.0) > 1e-9:
            raise ValueError(f"split fractions must be non-negative and sum to 1, got {self.fractions}")
        return self

    def rows(self, part: str) -> list[int]:
        if part not in ("train", "validation", "test"):
            raise ValueError(f"Unknown split part '{part}'")
        rows: list[int] = getattr(self, part)
        return rows


class DatasetMetadata(BaseModel):
    """Contents of ``metadata.json`` in a dataset directory."""

    model_config = ConfigDict(extra="ignore")

    kind: DatasetKind
    tool_version: str
    seed: int
    chunk_size: int = Field(ge=1)
    n_requested: int = Field(ge=0)
    complete: bool = False
    chunks: list[ChunkInfo] = Field(default_factory=list)
    prior: PriorSpec | None = None
    acceptance: AcceptanceFilter | None = None
    solver: SolverConfig | None = None
    network: dict[str, Any] | None = None
    noise: NoiseSpec | None = None
    source: str | None = Field(default=None, description="input dataset directory")
    split: SplitIndices | None = None

    @property
    def records(self) -> int:
        return sum(c.records for c in self.chunks)

    @property
    def attempted(self) -> int:
        return sum(c.attempted for c in self.chunks)

    @property
    def acceptance_rate(self) -> float:
        attempted = self.attempted
        return self.records / attempted if attempted else 0.0

    def statistics(self) -> dict[str, Any]:
        """Acceptance bookkeeping for reports."""
        return {
            "attempted": self.attempted,
            "accepted": self.records,
            "rejected": sum(c.rejected for c in self.chunks),
            "failed": sum(c.failed for c in self.chunks),
            "acceptance_rate": self.acceptance_rate,
        }
