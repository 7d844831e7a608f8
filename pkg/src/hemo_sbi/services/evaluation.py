"""Evaluate a posterior estimator on held-out segments."""

from __future__ import annotations

import itertools
import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt
import pandas as pd

from hemo_sbi.core.exceptions import DatasetFormatError
from hemo_sbi.schemas.metrics import (
    DEFAULT_LEVELS,
    DEFAULT_SNR_EDGES,
    SCI_CELLS,
    BiomarkerReport,
    CalibrationReport,
    SnrBinMetrics,
)
from hemo_sbi.schemas.population import BIOMARKER_UNITS, BIOMARKERS, PriorSpec
from hemo_sbi.services.dataset_store import SegmentDataset
from hemo_sbi.services.metrics import (
    acauc,
    credibility_level,
    point_errors_from_means,
    region_cells,
    snr_bins,
    spearman_per_patient,
    std_thresholded_mae,
)
from hemo_sbi.services.npe_model import PosteriorEstimator
from hemo_sbi.services.population import lvet_ms

logger = logging.getLogger(__name__)

FloatArray = npt.NDArray[np.float64]

_ROW_BATCH = 32


def level_key(alpha: float) -> str:
    return f"{alpha:g}"


def biomarker_ranges(
    prior: PriorSpec | None, observed: FloatArray
) -> dict[str, tuple[float, float]]:
    """SCI grid range per biomarker: the prior's support where it is defined.

    HR comes from its prior, CO and LVET from the extreme corners of the
    prior box; SVR has no closed-form support and uses the observed range.
    """
    def observed_range(col: int) -> tuple[float, float]:
        lo, hi = float(observed[:, col].min()), float(observed[:, col].max())
        if hi <= lo:
            pad = 0.5 * abs(lo) if lo else 1.0
            lo, hi = lo - pad, hi + pad
        return lo, hi

    if prior is None:
        return {name: observed_range(i) for i, name in enumerate(BIOMARKERS)}
    hr, sv = prior.heart_rate, prior.stroke_volume_ml
    co = [h * s / 1000.0 for h in (hr.low, hr.high) for s in (sv.low, sv.high)]
    corners = itertools.product(
        (hr.low, hr.high),
        (sv.low, sv.high),
        (prior.lvet_offset_ms.low, prior.lvet_offset_ms.high),
        (prior.lvet_hr_noise.low, prior.lvet_hr_noise.high),
        (prior.lvet_sv_noise.low, prior.lvet_sv_noise.high),
    )
    lvet = [lvet_ms(*c) for c in corners]
    return {
        "heart_rate": (hr.low, hr.high),
        "cardiac_output": (min(co), max(co)),
        "svr": observed_range(BIOMARKERS.index("svr")),
        "lvet": (max(0.0, min(lvet)), max(lvet)),
    }


@dataclass
class EvaluationResult:
    """Report plus the per-row table behind it."""

    report: CalibrationReport
    rows: pd.DataFrame


def evaluate_estimator(
    est: PosteriorEstimator,
    test: SegmentDataset,
    *,
    prior: PriorSpec | None = None,
    levels: Sequence[float] = DEFAULT_LEVELS,
    n_samples: int = 1000,
    seed: int = 0,
    snr_edges: Sequence[float] = DEFAULT_SNR_EDGES,
    reference: SegmentDataset | None = None,
) -> EvaluationResult:
    """Sample the posterior of every test row and compute all metrics.

    Parameters
    ----------
    reference:
        Rows used for data-derived grid ranges; defaults to *test*.
    """
    n = len(test)
    if n == 0:
        raise DatasetFormatError("No test rows to evaluate")
    ranges = biomarker_ranges(prior, (reference if reference is not None else test).biomarkers)
    rng = np.random.default_rng(seed)
    k = len(BIOMARKERS)
    means = np.zeros((n, k))
    stds = np.zeros((n, k))
    cred = np.zeros((n, k))
    cells = {level_key(a): np.zeros((n, k)) for a in levels}

    x = test.signals(est.modality)
    for start in range(0, n, _ROW_BATCH):
        stop = min(n, start + _ROW_BATCH)
        draws = est.sample_batch(x[start:stop], test.age[start:stop], n_samples, seed + start)
        draws_np = draws.detach().cpu().numpy().astype(np.float64)
        for r in range(stop - start):
            row = start + r
            for j, name in enumerate(BIOMARKERS):
                d = draws_np[r, :, j]
                means[row, j] = d.mean()
                stds[row, j] = d.std()
                cred[row, j] = credibility_level(d, test.biomarkers[row, j], rng)
                lo, hi = ranges[name]
                for a in levels:
                    cells[level_key(a)][row, j] = region_cells(d, a, lo, hi, SCI_CELLS)
        logger.debug("Evaluated rows %d-%d of %d", start, stop, n)

    snr = test.snr(est.modality)
    truths = test.biomarkers
    mae, rae = point_errors_from_means(means, truths)
    bins = snr_bins(snr, snr_edges)
    frame = pd.DataFrame({"subject_id": test.subject_id, "snr_db": snr})

    reports: dict[str, BiomarkerReport] = {}
    for j, name in enumerate(BIOMARKERS):
        lo, hi = ranges[name]
        width = (hi - lo) / SCI_CELLS
        frame[f"{name}_truth"] = truths[:, j]
        frame[f"{name}_mean"] = means[:, j]
        frame[f"{name}_std"] = stds[:, j]
        frame[f"{name}_level"] = cred[:, j]
        bin_reports = []
        for (b_lo, b_hi), idx in zip(zip(snr_edges, snr_edges[1:]), bins):
            bin_reports.append(
                SnrBinMetrics(
                    low_db=b_lo,
                    high_db=b_hi,
                    count=int(idx.size),
                    mae=float(np.abs(means[idx, j] - truths[idx, j]).mean()) if idx.size else None,
                    acauc=acauc(cred[idx, j]) if idx.size else None,
                    sci={
                        key: float(c[idx, j].mean()) * width if idx.size else None
                        for key, c in cells.items()
                    },
                )
            )
        groups = frame.groupby("subject_id")[[f"{name}_truth", f"{name}_mean"]]
        per_patient = {
            sid: g for sid, g in groups if len(g) >= 3
        }
        spearman = spearman_per_patient(
            {sid: g[f"{name}_mean"].tolist() for sid, g in per_patient.items()},
            {sid: g[f"{name}_truth"].tolist() for sid, g in per_patient.items()},
        )
        reports[name] = BiomarkerReport(
            unit=BIOMARKER_UNITS[name],
            mae=float(mae[j]),
            rae=float(rae[j]),
            acauc=acauc(cred[:, j]),
            sci={key: float(c[:, j].mean()) * width for key, c in cells.items()},
            sci_cells={key: float(c[:, j].mean()) for key, c in cells.items()},
            grid_low=lo,
            grid_high=hi,
            spearman=[spearman[s] for s in sorted(spearman)],
            snr_bins=bin_reports,
            std_gating=std_thresholded_mae(means[:, j], stds[:, j], truths[:, j]),
        )
        for key, c in cells.items():
            frame[f"{name}_sci_{key}"] = c[:, j] * width

    report = CalibrationReport(
        modality=est.modality,
        n_pairs=n,
        n_samples=n_samples,
        levels=tuple(levels),
        snr_edges=tuple(snr_edges),
        biomarkers=reports,
    )
    logger.info(
        "Evaluation on %d rows: %s",
        n,
        ", ".join(f"{b} MAE {r.mae:.3g} ACAUC {r.acauc:.3f}" for b, r in reports.items()),
    )
    return EvaluationResult(report=report, rows=frame)


def posterior_summary(draws: FloatArray) -> pd.DataFrame:
    """Mean, std and 68/95% central intervals per biomarker."""
    q = np.quantile(draws, [0.025, 0.16, 0.84, 0.975], axis=0)
    return pd.DataFrame(
        {
            "biomarker": list(BIOMARKERS),
            "unit": [BIOMARKER_UNITS[b] for b in BIOMARKERS],
            "mean": draws.mean(axis=0),
            "std": draws.std(axis=0),
            "q2.5": q[0],
            "q16": q[1],
            "q84": q[2],
            "q97.5": q[3],
        }
    )
