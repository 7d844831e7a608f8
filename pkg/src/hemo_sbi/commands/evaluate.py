"""``hemo eval`` and ``hemo plot``."""

from __future__ import annotations

import argparse
import json
from pathlib import Path

import pandas as pd
from pydantic import ValidationError

from hemo_sbi.commands.common import add_seed, existing_inputs, float_list, print_json, stopwatch
from hemo_sbi.core.exceptions import ConfigError
from hemo_sbi.schemas.metrics import DEFAULT_LEVELS, DEFAULT_SNR_EDGES, CalibrationReport
from hemo_sbi.schemas.pipeline import EvalConfig
from hemo_sbi.services.dataset_store import SegmentDataset, load_segments, read_metadata
from hemo_sbi.services.evaluation import evaluate_estimator
from hemo_sbi.services.json_utils import write_json
from hemo_sbi.services.manifest import verify_manifest, write_file_manifest
from hemo_sbi.services.model_io import load_estimator
from hemo_sbi.services.plotting import write_loss_curves, write_report_plots, write_std_histograms

ROWS_FILE = "rows.csv"


def register(sub: argparse._SubParsersAction[argparse.ArgumentParser]) -> None:
    e = sub.add_parser("eval", help="calibration and accuracy report on held-out data")
    e.add_argument("--model", type=Path, required=True)
    e.add_argument("--data", type=Path, required=True)
    e.add_argument("--levels", type=float_list, default=DEFAULT_LEVELS)
    e.add_argument("--samples", type=int, default=1000, help="posterior draws per segment")
    e.add_argument("--snr-edges", type=float_list, default=DEFAULT_SNR_EDGES)
    e.add_argument("--split", choices=("train", "validation", "test", "all"), default="test")
    add_seed(e)
    e.add_argument("--out", type=Path, required=True, help="report.json")
    e.add_argument("--plots", type=Path, help="directory for CSV series and SVG figures")
    e.set_defaults(func=run_eval)

    p = sub.add_parser("plot", help="figures from an existing report")
    p.add_argument("--report", type=Path, required=True)
    p.add_argument("--rows", type=Path, help="per-row table written by eval")
    p.add_argument("--history", type=Path, help="training history CSV")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=run_plot)


def select_rows(data: SegmentDataset, split: str) -> SegmentDataset:
    return data if split == "all" else data.part(split)


def run_eval(args: argparse.Namespace) -> int:
    cfg = EvalConfig(
        levels=args.levels,
        n_samples=args.samples,
        snr_edges=args.snr_edges,
        split="test" if args.split == "all" else args.split,
    )
    verify_manifest(args.data)
    est, _ = load_estimator(args.model)
    data = load_segments(args.data)
    meta = read_metadata(args.data)
    with stopwatch() as elapsed:
        result = evaluate_estimator(
            est,
            select_rows(data, args.split),
            prior=meta.prior,
            levels=cfg.levels,
            n_samples=cfg.n_samples,
            seed=args.seed,
            snr_edges=cfg.snr_edges,
            reference=data,
        )
    write_json(args.out, result.report)
    write_file_manifest(
        args.out,
        command="eval",
        config={"eval": cfg, "split": args.split},
        seeds={"seed": args.seed},
        inputs=existing_inputs(args.model, args.data),
        wall_time=elapsed[0],
    )
    if args.plots is not None:
        args.plots.mkdir(parents=True, exist_ok=True)
        result.rows.to_csv(args.plots / ROWS_FILE, index=False, float_format="%.9g")
        write_report_plots(result.report, args.plots)
        write_std_histograms(result.rows, args.plots)
    print_json(
        {
            name: {"mae": bm.mae, "rae": bm.rae, "acauc": bm.acauc, "sci": bm.sci}
            for name, bm in result.report.biomarkers.items()
        }
    )
    return 0


def read_report(path: Path) -> CalibrationReport:
    try:
        return CalibrationReport.model_validate(json.loads(path.read_text(encoding="utf-8")))
    except (OSError, json.JSONDecodeError, ValidationError) as exc:
        raise ConfigError(f"Cannot read report {path}: {exc}") from exc


def run_plot(args: argparse.Namespace) -> int:
    report = read_report(args.report)
    paths = write_report_plots(report, args.out)
    if args.rows is not None:
        paths += write_std_histograms(pd.read_csv(args.rows), args.out)
    if args.history is not None:
        paths += write_loss_curves(pd.read_csv(args.history, index_col="epoch"), args.out)
    print_json({"files": paths})
    return 0
