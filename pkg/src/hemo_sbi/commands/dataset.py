"""``hemo dataset generate|finalize``."""

from __future__ import annotations

import argparse
from pathlib import Path

from hemo_sbi.commands.common import (
    add_seed,
    existing_inputs,
    float_list,
    load_config,
    network_or_reference,
    print_json,
    stopwatch,
)
from hemo_sbi.core.exceptions import ConfigError
from hemo_sbi.schemas.dataset import DEFAULT_SPLIT
from hemo_sbi.schemas.population import AcceptanceFilter, PriorSpec
from hemo_sbi.schemas.signals import NoiseSpec
from hemo_sbi.schemas.solver import SolverConfig
from hemo_sbi.services.dataset_store import finalize_dataset, generate_dataset
from hemo_sbi.services.manifest import verify_manifest, write_manifest


def register(sub: argparse._SubParsersAction[argparse.ArgumentParser]) -> None:
    p = sub.add_parser("dataset", help="generate or finalize in-silico datasets")
    actions = p.add_subparsers(dest="dataset_command", metavar="{generate,finalize}", required=True)

    g = actions.add_parser("generate", help="sample, simulate and filter virtual subjects")
    g.add_argument("--n", type=int, required=True, help="subjects to attempt")
    g.add_argument("--prior", type=Path, help="PriorSpec JSON")
    g.add_argument("--network", type=Path, help="network JSON (default: bundled reference)")
    g.add_argument("--solver", type=Path, help="SolverConfig JSON")
    g.add_argument("--filter", type=Path, help="AcceptanceFilter JSON")
    g.add_argument("--chunk-size", type=int, help="records per chunk (default: HEMO_CHUNK_SIZE)")
    g.add_argument("--threads", type=int, help="worker processes (default: HEMO_THREADS)")
    add_seed(g, default=None)
    g.add_argument("--out", type=Path, required=True)
    g.set_defaults(func=run_generate)

    f = actions.add_parser("finalize", help="crop, add noise and band-pass a clean dataset")
    f.add_argument("--in", dest="in_dir", type=Path, required=True)
    f.add_argument("--noise", type=Path, help="NoiseSpec JSON (default: stochastic model)")
    f.add_argument("--split", type=float_list, default=DEFAULT_SPLIT, help="train,validation,test fractions")
    add_seed(f)
    f.add_argument("--out", type=Path, required=True)
    f.set_defaults(func=run_finalize)


def run_generate(args: argparse.Namespace) -> int:
    if args.n < 1:
        raise ConfigError("--n must be at least 1")
    prior = load_config(args.prior, PriorSpec)
    cfg = load_config(args.solver, SolverConfig)
    flt = load_config(args.filter, AcceptanceFilter)
    net = network_or_reference(args.network)
    with stopwatch() as elapsed:
        meta = generate_dataset(
            args.out,
            args.n,
            prior,
            net,
            cfg,
            args.seed,
            acceptance=flt,
            chunk_size=args.chunk_size,
            threads=args.threads,
        )
    write_manifest(
        args.out,
        command="dataset generate",
        config={"n": args.n, "prior": prior, "solver": cfg, "filter": flt, "chunk_size": meta.chunk_size},
        seeds={"seed": args.seed},
        inputs=existing_inputs(args.prior, args.network, args.solver, args.filter),
        wall_time=elapsed[0],
    )
    print_json({"out": args.out, **meta.statistics()})
    return 0


def run_finalize(args: argparse.Namespace) -> int:
    split = tuple(args.split)
    if len(split) != 3:
        raise ConfigError("--split needs three fractions")
    noise = load_config(args.noise, NoiseSpec)
    verify_manifest(args.in_dir)
    with stopwatch() as elapsed:
        meta = finalize_dataset(args.in_dir, args.out, noise, args.seed, split=split)
    write_manifest(
        args.out,
        command="dataset finalize",
        config={"noise": noise, "split": split},
        seeds={"seed": args.seed},
        inputs=existing_inputs(args.in_dir, args.noise),
        wall_time=elapsed[0],
    )
    parts = meta.split.model_dump(include={"train", "validation", "test"}) if meta.split else {}
    print_json({"out": args.out, "segments": meta.records, **{k: len(v) for k, v in parts.items()}})
    return 0
