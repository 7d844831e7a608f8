"""CSV series and SVG figures of evaluation reports and training curves."""

from __future__ import annotations

import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from hemo_sbi.schemas.metrics import CalibrationReport  # noqa: E402
from hemo_sbi.schemas.population import BIOMARKERS  # noqa: E402

logger = logging.getLogger(__name__)

_FIGSIZE = (7.0, 4.5)


def _save(fig: plt.Figure, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
    return path


def snr_series(report: CalibrationReport) -> pd.DataFrame:
    """One row per (biomarker, SNR bin) with MAE, ACAUC and SCI per level."""
    rows = []
    for name, bm in report.biomarkers.items():
        for b in bm.snr_bins:
            row: dict[str, object] = {
                "biomarker": name,
                "snr_low_db": b.low_db,
                "snr_high_db": b.high_db,
                "snr_mid_db": 0.5 * (b.low_db + b.high_db),
                "count": b.count,
                "mae": b.mae,
                "acauc": b.acauc,
            }
            row.update({f"sci_{k}": v for k, v in b.sci.items()})
            rows.append(row)
    return pd.DataFrame(rows)


def gating_series(report: CalibrationReport) -> pd.DataFrame:
    rows = [
        {"biomarker": name, **p.model_dump()}
        for name, bm in report.biomarkers.items()
        for p in bm.std_gating
    ]
    return pd.DataFrame(rows)


def _metric_vs_snr(series: pd.DataFrame, column: str, ylabel: str, path: Path) -> Path:
    fig, axes = plt.subplots(1, len(BIOMARKERS), figsize=(3.2 * len(BIOMARKERS), 3.4))
    for ax, name in zip(np.atleast_1d(axes), BIOMARKERS):
        sub = series[series["biomarker"] == name].dropna(subset=[column])
        ax.plot(sub["snr_mid_db"], sub[column], marker="o", linewidth=1.2)
        ax.set_title(name)
        ax.set_xlabel("SNR (dB)")
        ax.grid(True, alpha=0.25)
    np.atleast_1d(axes)[0].set_ylabel(ylabel)
    return _save(fig, path)


def write_report_plots(report: CalibrationReport, out_dir: Path) -> list[Path]:
    """MAE, ACAUC and SCI against SNR, plus std-gated MAE."""
    out_dir.mkdir(parents=True, exist_ok=True)
    series = snr_series(report)
    gating = gating_series(report)
    series.to_csv(out_dir / "snr_bins.csv", index=False)
    gating.to_csv(out_dir / "std_gating.csv", index=False)
    paths = [out_dir / "snr_bins.csv", out_dir / "std_gating.csv"]
    if series.empty:
        logger.warning("Report has no SNR bins; skipping SNR figures")
    else:
        paths.append(_metric_vs_snr(series, "mae", "MAE", out_dir / "mae_vs_snr.svg"))
        paths.append(_metric_vs_snr(series, "acauc", "ACAUC", out_dir / "acauc_vs_snr.svg"))
        for level in report.levels:
            col = f"sci_{level:g}"
            if col in series:
                paths.append(
                    _metric_vs_snr(series, col, f"SCI ({level:g})", out_dir / f"sci_{level:g}_vs_snr.svg")
                )
    if not gating.empty:
        fig, axes = plt.subplots(1, len(BIOMARKERS), figsize=(3.2 * len(BIOMARKERS), 3.4))
        for ax, name in zip(np.atleast_1d(axes), BIOMARKERS):
            sub = gating[gating["biomarker"] == name]
            ax.plot(sub["kept_fraction"], sub["mae"], marker="o", linewidth=1.2)
            ax.invert_xaxis()
            ax.set_title(name)
            ax.set_xlabel("kept fraction (lowest std)")
            ax.grid(True, alpha=0.25)
        np.atleast_1d(axes)[0].set_ylabel("MAE")
        paths.append(_save(fig, out_dir / "std_gating_mae.svg"))
    return paths


def write_std_histograms(rows: pd.DataFrame, out_dir: Path, bins: int = 30) -> list[Path]:
    """Histogram of posterior std per biomarker from an evaluation row table."""
    out_dir.mkdir(parents=True, exist_ok=True)
    counts = {}
    fig, axes = plt.subplots(1, len(BIOMARKERS), figsize=(3.2 * len(BIOMARKERS), 3.4))
    for ax, name in zip(np.atleast_1d(axes), BIOMARKERS):
        values = rows[f"{name}_std"].to_numpy(dtype=float)
        hist, edges = np.histogram(values, bins=bins)
        counts[name] = pd.DataFrame({"low": edges[:-1], "high": edges[1:], "count": hist})
        ax.stairs(hist, edges, fill=True, alpha=0.6)
        ax.set_title(name)
        ax.set_xlabel("posterior std")
    np.atleast_1d(axes)[0].set_ylabel("count")
    table = pd.concat(counts, names=["biomarker", "bin"]).reset_index(level=0)
    table.to_csv(out_dir / "std_histograms.csv", index=False)
    return [out_dir / "std_histograms.csv", _save(fig, out_dir / "std_histograms.svg")]


def write_loss_curves(history: pd.DataFrame, out_dir: Path) -> list[Path]:
    """Training and validation loss per epoch (columns ``train_loss``, ``validation_loss``)."""
    out_dir.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    ax.plot(history.index, history["train_loss"], label="train", linewidth=1.2)
    if "validation_loss" in history:
        ax.plot(history.index, history["validation_loss"], label="validation", linewidth=1.2)
    ax.set_xlabel("epoch")
    ax.set_ylabel("negative log-likelihood")
    ax.grid(True, alpha=0.25)
    ax.legend(fontsize=8)
    return [_save(fig, out_dir / "loss_curves.svg")]
