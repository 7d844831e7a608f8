"""``hemo simulate``: one simulation written as HSR1 binary or CSV."""

from __future__ import annotations

import argparse
import logging
from pathlib import Path
from typing import Any

from hemo_sbi.commands.common import (
    existing_inputs,
    load_config,
    network_or_reference,
    print_json,
    read_json_file,
    stopwatch,
)
from hemo_sbi.core.exceptions import ConfigError
from hemo_sbi.schemas.network import ArterialNetwork
from hemo_sbi.schemas.solver import ProbeRequest, SolverConfig
from hemo_sbi.services.manifest import write_file_manifest
from hemo_sbi.services.network_io import load_heart_function
from hemo_sbi.services.result_io import write_result
from hemo_sbi.services.solver import run_simulation

logger = logging.getLogger(__name__)


def default_probes(net: ArterialNetwork) -> list[ProbeRequest]:
    """Pressure at the aortic inlet and at the distal end of every leaf."""
    return [ProbeRequest(segment_id=net.root, position=0.0)] + [
        ProbeRequest(segment_id=leaf, position=1.0) for leaf in net.leaves()
    ]


def load_probes(path: Path | None, net: ArterialNetwork) -> list[ProbeRequest]:
    if path is None:
        return default_probes(net)
    raw: Any = read_json_file(path)
    if isinstance(raw, dict):
        raw = raw.get("probes")
    if not isinstance(raw, list) or not raw:
        raise ConfigError(f"{path}: expected a non-empty list of probes")
    return [load_probe(item, path) for item in raw]


def load_probe(item: Any, path: Path) -> ProbeRequest:
    try:
        return ProbeRequest.model_validate(item)
    except ValueError as exc:
        raise ConfigError(f"{path}: invalid probe {item!r}: {exc}") from exc


def register(sub: argparse._SubParsersAction[argparse.ArgumentParser]) -> None:
    p = sub.add_parser("simulate", help="run one simulation and record probes")
    p.add_argument("--network", type=Path, help="network JSON (default: bundled reference)")
    p.add_argument("--heart", type=Path, required=True, help="heart-function JSON")
    p.add_argument("--probes", type=Path, help="probe list JSON (default: root and leaves)")
    p.add_argument("--config", type=Path, help="SolverConfig JSON")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--format", choices=("binary", "csv"), default="binary")
    p.set_defaults(func=run)


def run(args: argparse.Namespace) -> int:
    net = network_or_reference(args.network)
    hf = load_heart_function(args.heart)
    cfg = load_config(args.config, SolverConfig)
    probes = load_probes(args.probes, net)
    with stopwatch() as elapsed:
        result = run_simulation(net, hf, cfg, probes)
        write_result(result, args.out, fmt=args.format)
    write_file_manifest(
        args.out,
        command="simulate",
        config={"solver": cfg, "heart": hf, "probes": probes, "format": args.format},
        inputs=existing_inputs(args.network, args.heart, args.probes, args.config),
        wall_time=elapsed[0],
    )
    print_json(
        {
            "out": args.out,
            "probes": list(result.probe_names),
            "samples": result.n_samples,
            "beat_boundaries": list(result.beat_boundaries),
            "diagnostics": result.diagnostics,
        }
    )
    return 0
