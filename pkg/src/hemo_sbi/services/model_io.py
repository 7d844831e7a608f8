"""``model.bin`` serialization of a posterior estimator."""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Any

import numpy as np
import torch
from pydantic import ValidationError

from hemo_sbi import __version__
from hemo_sbi.core.exceptions import ModelFormatError
from hemo_sbi.schemas.npe import EncoderConfig, FlowConfig, NormalizationStats, Precision, TrainConfig
from hemo_sbi.schemas.signals import Modality
from hemo_sbi.services.binary_io import read_container, write_container
from hemo_sbi.services.npe_model import PosteriorEstimator, torch_dtype

logger = logging.getLogger(__name__)

MODEL_MAGIC = b"HNPE"
MODEL_VERSION = 1


def save_estimator(
    est: PosteriorEstimator,
    path: Path,
    *,
    train_config: TrainConfig | None = None,
    extra: dict[str, Any] | None = None,
) -> None:
    """Write weights (float32 little-endian), layer shapes, normalization and config."""
    state = est.state_dict()
    arrays = {name: t.detach().cpu().numpy().astype("<f4") for name, t in state.items()}
    meta = {
        "tool_version": __version__,
        "modality": est.modality,
        "precision": Precision.FLOAT64 if est.dtype == torch.float64 else Precision.FLOAT32,
        "encoder": est.encoder_config,
        "flow": est.flow_config,
        "normalization": est.normalization,
        "train_config": train_config,
        "layers": [{"name": k, "shape": list(v.shape)} for k, v in state.items()],
        "extra": extra or {},
    }
    write_container(path, MODEL_MAGIC, meta, arrays, version=MODEL_VERSION)
    logger.info("Saved estimator to %s (%d tensors)", path, len(arrays))


def load_estimator(path: Path) -> tuple[PosteriorEstimator, dict[str, Any]]:
    """Rebuild an estimator from ``model.bin``; returns it with the raw metadata.

    Raises
    ------
    ModelFormatError
        On a bad magic, unknown version, or layer shapes that do not match
        the recorded architecture.
    """
    _, meta, arrays = read_container(
        path, magic=MODEL_MAGIC, versions=frozenset({MODEL_VERSION}), error=ModelFormatError
    )
    try:
        enc = EncoderConfig.model_validate(meta["encoder"])
        flow = FlowConfig.model_validate(meta["flow"])
        norm = NormalizationStats.model_validate(meta["normalization"])
        modality = Modality(meta["modality"])
        precision = Precision(meta.get("precision", Precision.FLOAT32))
    except (KeyError, ValueError, ValidationError) as exc:
        raise ModelFormatError(f"Invalid model metadata in {path}: {exc}") from exc

    est = PosteriorEstimator(enc, flow, norm, modality).to(torch_dtype(precision))
    expected = est.state_dict()
    if set(expected) != set(arrays):
        missing = sorted(set(expected) - set(arrays))
        unknown = sorted(set(arrays) - set(expected))
        raise ModelFormatError(f"Layer mismatch: missing {missing[:5]}, unexpected {unknown[:5]}")
    state = {}
    for name, ref in expected.items():
        arr = arrays[name]
        if tuple(arr.shape) != tuple(ref.shape):
            raise ModelFormatError(f"Layer '{name}' has shape {arr.shape}, expected {tuple(ref.shape)}")
        state[name] = torch.from_numpy(np.ascontiguousarray(arr, dtype=np.float32)).to(ref.dtype)
    est.load_state_dict(state)
    est.eval()
    return est, meta


def load_train_config(meta: dict[str, Any]) -> TrainConfig | None:
    """TrainConfig recorded in model metadata, if any."""
    raw = meta.get("train_config")
    return TrainConfig.model_validate(raw) if raw else None
