"""Maximum-likelihood training and hybrid fine-tuning of the estimator."""

from __future__ import annotations

import copy
import logging
import math
from collections.abc import Iterator
from dataclasses import dataclass, field

import numpy as np
import torch
from torch import Tensor, nn
from torch.utils.data import DataLoader, TensorDataset

from hemo_sbi.core.config import settings
from hemo_sbi.core.exceptions import DatasetFormatError, TrainingError
from hemo_sbi.schemas.npe import NormalizationStats, TrainConfig
from hemo_sbi.services.dataset_store import SegmentDataset
from hemo_sbi.services.npe_model import PosteriorEstimator, torch_dtype

logger = logging.getLogger(__name__)


@dataclass
class TrainingHistory:
    """Per-epoch mean losses (negative log-likelihood, normalized space)."""

    train_loss: list[float] = field(default_factory=list)
    validation_loss: list[float] = field(default_factory=list)
    best_epoch: int = -1
    best_loss: float = math.inf


def configure_torch(seed: int) -> None:
    """Seed torch and apply determinism mode from settings."""
    torch.manual_seed(seed)
    if settings.deterministic:
        torch.use_deterministic_algorithms(True)
        torch.set_num_threads(1)
    else:
        torch.set_num_threads(settings.effective_threads)


def compute_normalization(train: SegmentDataset, est: PosteriorEstimator) -> NormalizationStats:
    """Per-biomarker mean/std and one signal mean/std over all samples and time."""
    if len(train) < 2:
        raise DatasetFormatError("Need at least two training rows to normalize")
    signals = train.signals(est.modality).astype(np.float64)
    theta_std = train.biomarkers.std(axis=0)
    signal_std = float(signals.std())
    return NormalizationStats(
        theta_mean=tuple(float(v) for v in train.biomarkers.mean(axis=0)),
        theta_std=tuple(float(v) if v > 0 else 1.0 for v in theta_std),
        signal_mean=float(signals.mean()),
        signal_std=signal_std if signal_std > 0 else 1.0,
    )


def as_tensors(est: PosteriorEstimator, ds: SegmentDataset) -> TensorDataset:
    """``(x_norm, age_norm, theta_norm, row_id)`` tensors of a dataset."""
    with torch.no_grad():
        return TensorDataset(
            est.normalize_signal(ds.signals(est.modality)),
            est.normalize_age(ds.age),
            est.normalize_theta(ds.biomarkers),
            torch.arange(len(ds)),
        )


def _loader(data: TensorDataset, batch_size: int, seed: int, shuffle: bool) -> DataLoader[tuple[Tensor, ...]]:
    gen = torch.Generator()
    gen.manual_seed(seed)
    return DataLoader(data, batch_size=batch_size, shuffle=shuffle, generator=gen, drop_last=False)


def _batch_nll(est: PosteriorEstimator, batch: list[Tensor] | tuple[Tensor, ...]) -> Tensor:
    x, age, theta, _ = batch
    return -est.log_prob_normalized(theta, x, age).mean()


@torch.no_grad()
def mean_nll(est: PosteriorEstimator, data: TensorDataset, batch_size: int = 1000) -> float:
    """Mean negative log-likelihood over a tensor dataset (``nan`` if empty)."""
    n = len(data)
    if n == 0:
        return math.nan
    was_training = est.training
    est.eval()
    total = 0.0
    for batch in DataLoader(data, batch_size=batch_size, shuffle=False):
        total += float(_batch_nll(est, batch)) * batch[0].shape[0]
    est.train(was_training)
    return total / n


def _cycle(loader: DataLoader[tuple[Tensor, ...]]) -> Iterator[list[Tensor]]:
    while True:
        yield from loader


def fit(
    est: PosteriorEstimator,
    train: TensorDataset,
    validation: TensorDataset,
    tc: TrainConfig,
    seed: int,
    *,
    parameters: list[nn.Parameter] | None = None,
    calibration: TensorDataset | None = None,
    calibration_validation: TensorDataset | None = None,
) -> TrainingHistory:
    """Minibatch Adam on the negative log-likelihood, keeping the best checkpoint.

    With *calibration* data every step adds the mean NLL of a calibration
    batch to the synthetic batch loss (equal weighting of both sets).
    Model selection uses the validation loss, or the training loss when no
    validation rows exist.
    """
    params = parameters if parameters is not None else [p for p in est.parameters() if p.requires_grad]
    optimizer = torch.optim.Adam(params, lr=tc.learning_rate, weight_decay=tc.weight_decay)
    loader = _loader(train, tc.batch_size, seed, shuffle=True)
    calib_batches = (
        _cycle(_loader(calibration, tc.batch_size, seed + 1, shuffle=True))
        if calibration is not None and len(calibration) > 0
        else None
    )
    history = TrainingHistory()
    best_state = copy.deepcopy(est.state_dict())
    stale = 0

    for epoch in range(tc.epochs):
        est.train()
        total, count = 0.0, 0
        for batch in loader:
            loss = _batch_nll(est, batch)
            if calib_batches is not None:
                loss = loss + _batch_nll(est, next(calib_batches))
            if not torch.isfinite(loss):
                raise TrainingError(epoch, [int(i) for i in batch[3].tolist()])
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            total += float(loss) * batch[0].shape[0]
            count += batch[0].shape[0]
        train_loss = total / max(count, 1)

        val_loss = mean_nll(est, validation)
        if calibration_validation is not None and len(calibration_validation) > 0:
            val_loss += mean_nll(est, calibration_validation)
        history.train_loss.append(train_loss)
        history.validation_loss.append(val_loss)

        score = val_loss if math.isfinite(val_loss) else train_loss
        if score < history.best_loss:
            history.best_loss, history.best_epoch = score, epoch
            best_state = copy.deepcopy(est.state_dict())
            stale = 0
        else:
            stale += 1
        logger.debug("Epoch %d: train %.4f, validation %.4f", epoch, train_loss, val_loss)
        if tc.patience is not None and stale >= tc.patience:
            logger.info("No improvement for %d epochs; stopping at epoch %d", stale, epoch)
            break

    est.load_state_dict(best_state)
    est.eval()
    logger.info(
        "Training finished: best epoch %d, loss %.4f (%d epochs run)",
        history.best_epoch,
        history.best_loss,
        len(history.train_loss),
    )
    return history


def train_estimator(
    dataset: SegmentDataset, tc: TrainConfig, seed: int
) -> tuple[PosteriorEstimator, TrainingHistory]:
    """Train a new estimator on the recorded train/validation split of *dataset*."""
    if dataset.split is None:
        raise DatasetFormatError("Dataset has no recorded train/validation/test split")
    configure_torch(seed)
    est = PosteriorEstimator(tc.encoder, tc.flow, modality=tc.modality).to(torch_dtype(tc.precision))
    train_part, val_part = dataset.part("train"), dataset.part("validation")
    est.normalization = compute_normalization(train_part, est)
    history = fit(est, as_tensors(est, train_part), as_tensors(est, val_part), tc, seed)
    return est, history


def finetune_hybrid(
    est: PosteriorEstimator,
    calibration: SegmentDataset,
    synthetic: SegmentDataset,
    tc: TrainConfig,
    seed: int,
) -> TrainingHistory:
    """Fine-tune the encoder on calibration plus synthetic data, flow frozen.

    The objective is the calibration-set NLL plus the synthetic-set NLL;
    with an empty calibration set it is the synthetic NLL alone. The
    normalization statistics of the original training are kept.
    """
    if synthetic.split is None:
        raise DatasetFormatError("Synthetic dataset has no recorded split")
    configure_torch(seed)
    for p in est.flow.parameters():
        p.requires_grad_(False)
    try:
        if calibration.split is not None and calibration.split.train:
            calib_train = calibration.part("train")
            calib_val = calibration.part("validation")
        else:
            calib_train, calib_val = calibration, SegmentDataset.empty()
        return fit(
            est,
            as_tensors(est, synthetic.part("train")),
            as_tensors(est, synthetic.part("validation")),
            tc,
            seed,
            parameters=list(est.encoder.parameters()),
            calibration=as_tensors(est, calib_train),
            calibration_validation=as_tensors(est, calib_val),
        )
    finally:
        for p in est.flow.parameters():
            p.requires_grad_(True)
