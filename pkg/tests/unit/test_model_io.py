"""Tests for estimator serialization."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest
import torch

from hemo_sbi.core.exceptions import ModelFormatError
from hemo_sbi.schemas.npe import FlowConfig, NormalizationStats
from hemo_sbi.schemas.signals import Modality
from hemo_sbi.services.binary_io import read_container, write_container
from hemo_sbi.services.model_io import (
    MODEL_MAGIC,
    load_estimator,
    load_train_config,
    save_estimator,
)
from hemo_sbi.services.npe_model import PosteriorEstimator
from tests.conftest import tiny_train_config


def _estimator(hidden: int = 16) -> PosteriorEstimator:
    est = PosteriorEstimator(
        flow_config=FlowConfig(hidden_features=hidden, hidden_layers=2),
        normalization=NormalizationStats(
            theta_mean=(70.0, 5.0, 1.3e8, 300.0),
            theta_std=(10.0, 1.0, 2e7, 25.0),
            signal_mean=1.5,
            signal_std=4.0,
        ),
        modality=Modality.PPG,
    )
    gen = torch.Generator().manual_seed(0)
    with torch.no_grad():
        for p in est.parameters():
            p.add_(0.05 * torch.randn(p.shape, generator=gen))
    return est


class TestRoundTrip:
    """Saved models behave like the originals."""

    def test_same_samples_and_density(self, tmp_path: Path) -> None:
        est = _estimator()
        path = tmp_path / "model.bin"
        save_estimator(est, path, train_config=tiny_train_config(), extra={"seed": 3})
        loaded, meta = load_estimator(path)
        x = np.random.default_rng(1).standard_normal(1000)
        assert torch.equal(est.sample(x, 40.0, 50, seed=9), loaded.sample(x, 40.0, 50, seed=9))
        theta = np.array([[72.0, 5.5, 1.2e8, 310.0]])
        assert torch.equal(est.log_density(theta, x, [40.0]), loaded.log_density(theta, x, [40.0]))
        assert loaded.modality is Modality.PPG
        assert loaded.normalization == est.normalization
        assert meta["extra"] == {"seed": 3}
        assert load_train_config(meta) == tiny_train_config()

    def test_weights_are_float32(self, tmp_path: Path) -> None:
        path = tmp_path / "model.bin"
        save_estimator(_estimator(), path)
        _, meta, arrays = read_container(path, magic=MODEL_MAGIC)
        assert all(a.dtype.str == "<f4" for a in arrays.values())
        assert {entry["name"] for entry in meta["layers"]} == set(arrays)
        assert load_train_config(meta) is None

    def test_float64_model_reloads_as_float64(self, tmp_path: Path) -> None:
        path = tmp_path / "model.bin"
        save_estimator(_estimator().double(), path)
        loaded, meta = load_estimator(path)
        assert meta["precision"] == "float64"
        assert loaded.dtype == torch.float64


class TestFormatErrors:
    """Corrupt or mismatched files."""

    def test_bad_magic(self, tmp_path: Path) -> None:
        path = tmp_path / "model.bin"
        path.write_bytes(b"NOPE" + bytes(20))
        with pytest.raises(ModelFormatError, match="Bad magic"):
            load_estimator(path)

    def test_unknown_version(self, tmp_path: Path) -> None:
        path = tmp_path / "model.bin"
        write_container(path, MODEL_MAGIC, {}, {}, version=2)
        with pytest.raises(ModelFormatError, match="version 2"):
            load_estimator(path)

    def test_missing_metadata(self, tmp_path: Path) -> None:
        path = tmp_path / "model.bin"
        write_container(path, MODEL_MAGIC, {"modality": "apw"}, {})
        with pytest.raises(ModelFormatError, match="Invalid model metadata"):
            load_estimator(path)

    def test_shape_mismatch(self, tmp_path: Path) -> None:
        path = tmp_path / "model.bin"
        save_estimator(_estimator(hidden=16), path)
        _, meta, _ = read_container(path, magic=MODEL_MAGIC)
        other = {k: v.numpy() for k, v in _estimator(hidden=8).state_dict().items()}
        write_container(path, MODEL_MAGIC, meta, other)
        with pytest.raises(ModelFormatError, match="has shape"):
            load_estimator(path)

    def test_missing_layer(self, tmp_path: Path) -> None:
        path = tmp_path / "model.bin"
        save_estimator(_estimator(), path)
        _, meta, arrays = read_container(path, magic=MODEL_MAGIC)
        arrays.pop(next(iter(arrays)))
        write_container(path, MODEL_MAGIC, meta, arrays)
        with pytest.raises(ModelFormatError, match="Layer mismatch"):
            load_estimator(path)

    def test_missing_file(self, tmp_path: Path) -> None:
        with pytest.raises(ModelFormatError):
            load_estimator(tmp_path / "absent.bin")
