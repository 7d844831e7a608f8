"""``hemo train`` and ``hemo finetune``."""

from __future__ import annotations

import argparse
from pathlib import Path

import pandas as pd

from hemo_sbi.commands.common import add_seed, existing_inputs, load_config, print_json, stopwatch
from hemo_sbi.core.exceptions import ConfigError
from hemo_sbi.schemas.npe import TrainConfig
from hemo_sbi.services.dataset_store import load_segments
from hemo_sbi.services.manifest import verify_manifest, write_file_manifest
from hemo_sbi.services.model_io import load_estimator, load_train_config, save_estimator
from hemo_sbi.services.npe_training import TrainingHistory, finetune_hybrid, train_estimator


def history_path(model_path: Path) -> Path:
    return model_path.with_name(model_path.stem + ".history.csv")


def write_history(history: TrainingHistory, model_path: Path) -> Path:
    path = history_path(model_path)
    frame = pd.DataFrame(
        {"train_loss": history.train_loss, "validation_loss": history.validation_loss}
    )
    frame.index.name = "epoch"
    frame.to_csv(path)
    return path


def register(sub: argparse._SubParsersAction[argparse.ArgumentParser]) -> None:
    t = sub.add_parser("train", help="train a posterior estimator")
    t.add_argument("--data", type=Path, required=True, help="finalized dataset directory")
    t.add_argument("--config", type=Path, help="TrainConfig JSON")
    add_seed(t)
    t.add_argument("--out", type=Path, required=True, help="model.bin path")
    t.set_defaults(func=run_train)

    f = sub.add_parser("finetune", help="hybrid fine-tuning of the encoder, flow frozen")
    f.add_argument("--model", type=Path, required=True)
    f.add_argument("--calib", type=Path, required=True, help="labeled calibration dataset")
    f.add_argument("--synth", type=Path, required=True, help="synthetic dataset")
    f.add_argument("--config", type=Path, help="TrainConfig JSON (default: the model's)")
    add_seed(f)
    f.add_argument("--out", type=Path, required=True)
    f.set_defaults(func=run_finetune)


def run_train(args: argparse.Namespace) -> int:
    tc = load_config(args.config, TrainConfig)
    verify_manifest(args.data)
    data = load_segments(args.data)
    with stopwatch() as elapsed:
        est, history = train_estimator(data, tc, args.seed)
        save_estimator(
            est, args.out, train_config=tc, extra={"best_epoch": history.best_epoch, "data": args.data}
        )
    write_history(history, args.out)
    write_file_manifest(
        args.out,
        command="train",
        config={"train": tc},
        seeds={"seed": args.seed},
        inputs=existing_inputs(args.data, args.config),
        wall_time=elapsed[0],
    )
    print_json(
        {"out": args.out, "best_epoch": history.best_epoch, "best_loss": history.best_loss}
    )
    return 0


def run_finetune(args: argparse.Namespace) -> int:
    est, meta = load_estimator(args.model)
    tc = load_config(args.config, TrainConfig, default=load_train_config(meta))
    if tc.modality is not est.modality:
        raise ConfigError(f"Model was trained on {est.modality}, config asks for {tc.modality}")
    verify_manifest(args.calib)
    verify_manifest(args.synth)
    calib, synth = load_segments(args.calib), load_segments(args.synth)
    with stopwatch() as elapsed:
        history = finetune_hybrid(est, calib, synth, tc, args.seed)
        save_estimator(
            est, args.out, train_config=tc, extra={"finetuned_from": args.model, "best_epoch": history.best_epoch}
        )
    write_history(history, args.out)
    write_file_manifest(
        args.out,
        command="finetune",
        config={"train": tc},
        seeds={"seed": args.seed},
        inputs=existing_inputs(args.model, args.calib, args.synth, args.config),
        wall_time=elapsed[0],
    )
    print_json({"out": args.out, "best_epoch": history.best_epoch, "best_loss": history.best_loss})
    return 0
