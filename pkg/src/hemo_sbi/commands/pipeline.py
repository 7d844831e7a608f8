"""``hemo pipeline``: generate, finalize, train and evaluate in one run.

Layout of ``--out``::

    clean/            dataset generate
    segments/         dataset finalize
    model.bin         train (+ model.history.csv)
    eval/report.json  eval (+ CSV series and figures)
"""

from __future__ import annotations

import argparse
import logging
from pathlib import Path

import pandas as pd

from hemo_sbi.commands.common import load_config, network_or_reference, print_json, stopwatch
from hemo_sbi.commands.evaluate import ROWS_FILE
from hemo_sbi.commands.train import write_history
from hemo_sbi.schemas.pipeline import PipelineConfig
from hemo_sbi.services.dataset_store import finalize_dataset, generate_dataset, load_segments
from hemo_sbi.services.evaluation import evaluate_estimator
from hemo_sbi.services.json_utils import write_json
from hemo_sbi.services.manifest import write_file_manifest, write_manifest
from hemo_sbi.services.model_io import save_estimator
from hemo_sbi.services.npe_training import train_estimator
from hemo_sbi.services.plotting import write_loss_curves, write_report_plots, write_std_histograms

logger = logging.getLogger(__name__)


def register(sub: argparse._SubParsersAction[argparse.ArgumentParser]) -> None:
    p = sub.add_parser("pipeline", help="run generate -> finalize -> train -> eval")
    p.add_argument("--config", type=Path, required=True, help="PipelineConfig JSON")
    p.add_argument("--threads", type=int, help="worker processes for simulation")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=run)


def run(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, PipelineConfig)
    run_pipeline(cfg, args.out, threads=args.threads, config_path=args.config)
    print_json({"out": args.out, "report": args.out / "eval" / "report.json"})
    return 0


def run_pipeline(
    cfg: PipelineConfig,
    out: Path,
    *,
    threads: int | None = None,
    config_path: Path | None = None,
) -> Path:
    """Run every stage with seeds derived from ``cfg.seed``; return the report path."""
    clean, segments = out / "clean", out / "segments"
    model_path, eval_dir = out / "model.bin", out / "eval"
    configs = [config_path] if config_path is not None else []
    net = network_or_reference(cfg.network)
    seeds = {"seed": cfg.seed}

    logger.info("Stage 1/4: generating %d subjects into %s", cfg.n_subjects, clean)
    with stopwatch() as elapsed:
        generate_dataset(
            clean,
            cfg.n_subjects,
            cfg.prior,
            net,
            cfg.solver,
            cfg.seed,
            acceptance=cfg.acceptance,
            chunk_size=cfg.chunk_size,
            threads=threads,
        )
    write_manifest(
        clean,
        command="pipeline: dataset generate",
        config={"n": cfg.n_subjects, "prior": cfg.prior, "solver": cfg.solver, "filter": cfg.acceptance},
        seeds=seeds,
        inputs=configs + ([cfg.network] if cfg.network else []),
        wall_time=elapsed[0],
    )

    logger.info("Stage 2/4: finalizing segments into %s", segments)
    with stopwatch() as elapsed:
        finalize_dataset(clean, segments, cfg.noise, cfg.seed, split=cfg.train.split)
    write_manifest(
        segments,
        command="pipeline: dataset finalize",
        config={"noise": cfg.noise, "split": cfg.train.split},
        seeds=seeds,
        inputs=[clean],
        wall_time=elapsed[0],
    )

    logger.info("Stage 3/4: training on %s", cfg.train.modality)
    data = load_segments(segments)
    with stopwatch() as elapsed:
        est, history = train_estimator(data, cfg.train, cfg.seed)
        save_estimator(est, model_path, train_config=cfg.train, extra={"best_epoch": history.best_epoch})
    hist_file = write_history(history, model_path)
    write_file_manifest(
        model_path,
        command="pipeline: train",
        config={"train": cfg.train},
        seeds=seeds,
        inputs=[segments],
        wall_time=elapsed[0],
    )

    logger.info("Stage 4/4: evaluating on the %s split", cfg.evaluation.split)
    with stopwatch() as elapsed:
        result = evaluate_estimator(
            est,
            data.part(cfg.evaluation.split),
            prior=cfg.prior,
            levels=cfg.evaluation.levels,
            n_samples=cfg.evaluation.n_samples,
            seed=cfg.seed,
            snr_edges=cfg.evaluation.snr_edges,
            reference=data,
        )
    eval_dir.mkdir(parents=True, exist_ok=True)
    report_path = eval_dir / "report.json"
    write_json(report_path, result.report)
    result.rows.to_csv(eval_dir / ROWS_FILE, index=False, float_format="%.9g")
    write_report_plots(result.report, eval_dir)
    write_std_histograms(result.rows, eval_dir)
    write_loss_curves(pd.read_csv(hist_file, index_col="epoch"), eval_dir)
    write_manifest(
        eval_dir,
        command="pipeline: eval",
        config={"eval": cfg.evaluation},
        seeds=seeds,
        inputs=[model_path, segments],
        wall_time=elapsed[0],
    )
    return report_path
