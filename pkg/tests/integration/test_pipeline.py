"""End-to-end run: simulate a handful of subjects, train briefly, evaluate."""

from __future__ import annotations

import json
from collections.abc import Callable
from pathlib import Path

import pytest

from hemo_sbi.commands.pipeline import run_pipeline
from hemo_sbi.schemas.metrics import CalibrationReport
from hemo_sbi.schemas.pipeline import EvalConfig, PipelineConfig
from hemo_sbi.schemas.population import AcceptanceFilter
from hemo_sbi.schemas.solver import SolverConfig
from hemo_sbi.services.dataset_store import read_metadata
from hemo_sbi.services.manifest import verify_manifest
from tests.conftest import tiny_train_config

RunCli = Callable[..., tuple[int, str, str]]

pytestmark = [pytest.mark.integration, pytest.mark.slow]


def _config() -> PipelineConfig:
    return PipelineConfig(
        n_subjects=8,
        seed=3,
        chunk_size=4,
        acceptance=AcceptanceFilter(dbp_max=1000.0, sbp_min=0.0, sbp_max=1000.0),
        solver=SolverConfig(duration=6.0, transient_beats_to_discard=2),
        train=tiny_train_config(epochs=2, split=(0.5, 0.25, 0.25)),
        evaluation=EvalConfig(split="train"),
    )


class TestPipeline:
    """``hemo pipeline`` through its Python entry point and the CLI."""

    def test_run_pipeline(self, tmp_path: Path) -> None:
        report_path = run_pipeline(_config(), tmp_path, threads=1)
        meta = read_metadata(tmp_path / "clean")
        assert meta.attempted == 8
        assert meta.records > 0

        report = CalibrationReport.model_validate(json.loads(report_path.read_text()))
        assert report.n_samples == 1000
        for bm in report.biomarkers.values():
            assert 0.0 <= bm.acauc <= 0.5

        for stage in ("clean", "segments", "eval"):
            verify_manifest(tmp_path / stage)
        assert (tmp_path / "model.bin.manifest.json").is_file()
        assert (tmp_path / "eval" / "loss_curves.svg").is_file()

    def test_cli(self, tmp_path: Path, run_cli: RunCli) -> None:
        cfg = tmp_path / "pipeline.json"
        cfg.write_text(_config().model_dump_json())
        code, out, err = run_cli("pipeline", "--config", str(cfg), "--threads", "1", "--out", str(tmp_path / "run"))
        assert code == 0, err
        assert Path(json.loads(out)["report"]).is_file()
