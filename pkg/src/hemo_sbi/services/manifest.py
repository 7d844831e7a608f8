"""SHA-256 digests and run manifests."""

from __future__ import annotations

import hashlib
import json
import logging
from pathlib import Path
from typing import Any

from pydantic import ValidationError

from hemo_sbi import __version__
from hemo_sbi.core.exceptions import DatasetFormatError, DigestMismatchError
from hemo_sbi.schemas.manifest import MANIFEST_FILE, RunManifest
from hemo_sbi.services.json_utils import to_json_safe, write_json

logger = logging.getLogger(__name__)

_BLOCK = 1 << 20


def sha256_file(path: Path) -> str:
    """Hex SHA-256 of a file's bytes."""
    h = hashlib.sha256()
    with path.open("rb") as fh:
        for block in iter(lambda: fh.read(_BLOCK), b""):
            h.update(block)
    return h.hexdigest()


def digest_outputs(directory: Path) -> dict[str, str]:
    """Digest every regular file under *directory* except the manifest."""
    out: dict[str, str] = {}
    for path in sorted(p for p in directory.rglob("*") if p.is_file()):
        rel = path.relative_to(directory).as_posix()
        if rel == MANIFEST_FILE or rel.endswith(".tmp"):
            continue
        out[rel] = sha256_file(path)
    return out


def input_digests(paths: list[Path]) -> dict[str, str]:
    """Digest inputs; a directory contributes its manifest file."""
    out: dict[str, str] = {}
    for p in paths:
        target = p / MANIFEST_FILE if p.is_dir() else p
        if not target.is_file():
            raise DigestMismatchError(target.as_posix(), "missing")
        out[target.as_posix()] = sha256_file(target)
    return out


def write_manifest(
    directory: Path,
    *,
    command: str,
    config: dict[str, Any] | None = None,
    seeds: dict[str, int] | None = None,
    inputs: list[Path] | None = None,
    wall_time: float = 0.0,
) -> RunManifest:
    """Digest *directory* and write its single ``manifest.json``."""
    manifest = RunManifest(
        command=command,
        tool_version=__version__,
        config=to_json_safe(config or {}),
        seeds=seeds or {},
        inputs=input_digests(inputs or []),
        outputs=digest_outputs(directory),
        wall_time=wall_time,
    )
    write_json(directory / MANIFEST_FILE, manifest)
    logger.info("Wrote manifest for '%s' (%d outputs)", command, len(manifest.outputs))
    return manifest


def write_file_manifest(
    path: Path,
    *,
    command: str,
    config: dict[str, Any] | None = None,
    seeds: dict[str, int] | None = None,
    inputs: list[Path] | None = None,
    wall_time: float = 0.0,
) -> RunManifest:
    """Manifest for a single-file output, written next to it as ``<name>.manifest.json``."""
    manifest = RunManifest(
        command=command,
        tool_version=__version__,
        config=to_json_safe(config or {}),
        seeds=seeds or {},
        inputs=input_digests(inputs or []),
        outputs={path.name: sha256_file(path)},
        wall_time=wall_time,
    )
    write_json(path.with_name(path.name + ".manifest.json"), manifest)
    return manifest


def read_manifest(directory: Path) -> RunManifest:
    """Load ``manifest.json`` from *directory*."""
    path = directory / MANIFEST_FILE
    if not path.is_file():
        raise DigestMismatchError(path.as_posix(), "missing")
    try:
        return RunManifest.model_validate(json.loads(path.read_text(encoding="utf-8")))
    except (json.JSONDecodeError, ValidationError) as exc:
        raise DatasetFormatError(f"Corrupt manifest {path}: {exc}") from exc


def verify_manifest(directory: Path) -> RunManifest:
    """Check every output listed in the manifest against its digest.

    Raises
    ------
    DigestMismatchError
        Naming the first missing or changed file.
    """
    manifest = read_manifest(directory)
    for rel, digest in sorted(manifest.outputs.items()):
        path = directory / rel
        if not path.is_file():
            raise DigestMismatchError(path.as_posix(), "missing")
        if sha256_file(path) != digest:
            raise DigestMismatchError(path.as_posix(), "changed")
    return manifest
