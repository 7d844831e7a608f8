"""``hemo infer``: posterior samples for one segment."""

from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np
import pandas as pd

from hemo_sbi.commands.common import add_seed, print_json
from hemo_sbi.core.exceptions import ConfigError, DomainError
from hemo_sbi.schemas.population import BIOMARKERS
from hemo_sbi.schemas.signals import SEGMENT_LENGTH
from hemo_sbi.services.evaluation import posterior_summary
from hemo_sbi.services.model_io import load_estimator
from hemo_sbi.services.signal_pipeline import bandpass_filter


def read_segment(path: Path) -> np.ndarray:
    """Read 1000 samples from a text/CSV file (whitespace or comma separated)."""
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"Cannot read {path}: {exc}") from exc
    try:
        values = np.array([float(t) for t in text.replace(",", " ").split()], dtype=float)
    except ValueError as exc:
        raise ConfigError(f"{path}: non-numeric sample ({exc})") from exc
    if values.size != SEGMENT_LENGTH:
        raise DomainError(f"Segment must have {SEGMENT_LENGTH} samples, {path} has {values.size}")
    return values


def register(sub: argparse._SubParsersAction[argparse.ArgumentParser]) -> None:
    p = sub.add_parser("infer", help="sample the posterior of one segment")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--segment", type=Path, required=True, help="1000 samples at 125 Hz")
    p.add_argument("--age", type=float, required=True, help="years")
    p.add_argument("--samples", type=int, default=10000)
    p.add_argument("--bandpass", action="store_true", help="band-pass the raw segment first")
    add_seed(p)
    p.add_argument("--out", type=Path, required=True, help="posterior.csv")
    p.set_defaults(func=run)


def run(args: argparse.Namespace) -> int:
    if args.samples < 1:
        raise ConfigError("--samples must be at least 1")
    est, _ = load_estimator(args.model)
    x = read_segment(args.segment)
    if args.bandpass:
        x = bandpass_filter(x)
    draws = est.sample(x, args.age, args.samples, seed=args.seed).detach().cpu().numpy().astype(float)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(draws, columns=list(BIOMARKERS)).to_csv(args.out, index=False, float_format="%.9g")
    summary = posterior_summary(draws)
    summary_path = args.out.with_name(args.out.stem + ".summary.csv")
    summary.to_csv(summary_path, index=False, float_format="%.9g")
    print_json({"out": args.out, "summary": summary.to_dict(orient="records")})
    return 0
