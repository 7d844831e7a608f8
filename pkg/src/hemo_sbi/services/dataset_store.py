"""Chunked dataset directories: clean generation, finalization and loading."""

from __future__ import annotations

import json
import logging
from collections.abc import Iterator
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import numpy.typing as npt
from pydantic import ValidationError

from hemo_sbi import __version__
from hemo_sbi.core.config import settings
from hemo_sbi.core.exceptions import DatasetFormatError, DomainError
from hemo_sbi.schemas.dataset import (
    DEFAULT_SPLIT,
    ChunkInfo,
    DatasetKind,
    DatasetMetadata,
    SplitIndices,
)
from hemo_sbi.schemas.network import ArterialNetwork
from hemo_sbi.schemas.population import AcceptanceFilter, PriorSpec, VirtualSubject
from hemo_sbi.schemas.signals import SEGMENT_LENGTH, Modality, NoiseRecord, NoiseSpec
from hemo_sbi.schemas.solver import SolverConfig
from hemo_sbi.services.binary_io import read_container, write_container
from hemo_sbi.services.json_utils import write_json
from hemo_sbi.services.manifest import sha256_file
from hemo_sbi.services.network_io import network_to_dict
from hemo_sbi.services.population import SubjectRecord, generate_population
from hemo_sbi.services.signal_pipeline import apply_noise, bandpass, stack_and_crop

logger = logging.getLogger(__name__)

FloatArray = npt.NDArray[np.float64]

METADATA_FILE = "metadata.json"
CLEAN_MAGIC = b"HDC1"
SEGMENTS_MAGIC = b"HDS1"

_CROP_STREAM = 0
_APW_NOISE_STREAM = 1
_PPG_NOISE_STREAM = 2


def chunk_name(index: int) -> str:
    return f"chunk_{index:05d}.bin"


# ---------------------------------------------------------------------------
# Metadata
# ---------------------------------------------------------------------------


def read_metadata(directory: Path) -> DatasetMetadata:
    """Load and validate ``metadata.json``."""
    path = directory / METADATA_FILE
    if not path.is_file():
        raise DatasetFormatError(f"{path} not found; not a dataset directory")
    try:
        return DatasetMetadata.model_validate(json.loads(path.read_text(encoding="utf-8")))
    except (json.JSONDecodeError, ValidationError) as exc:
        raise DatasetFormatError(f"Invalid dataset metadata {path}: {exc}") from exc


def _write_metadata(directory: Path, meta: DatasetMetadata) -> None:
    write_json(directory / METADATA_FILE, meta)


# ---------------------------------------------------------------------------
# Clean chunks
# ---------------------------------------------------------------------------


def _encode_clean_chunk(records: list[SubjectRecord]) -> tuple[dict[str, Any], dict[str, np.ndarray]]:
    lengths = [r.apw_beat.size for r in records]
    offsets = np.concatenate([[0], np.cumsum(lengths)]).astype(np.int64)
    empty = np.zeros(0)
    arrays = {
        "beat_offsets": offsets,
        "apw": np.concatenate([r.apw_beat for r in records]) if records else empty,
        "ppg": np.concatenate([r.ppg_beat for r in records]) if records else empty,
        "sbp": np.array([r.sbp for r in records], dtype=np.float64),
        "dbp": np.array([r.dbp for r in records], dtype=np.float64),
    }
    meta = {"subjects": [r.subject.model_dump(mode="json") for r in records]}
    return meta, arrays


def read_clean_chunk(path: Path) -> list[SubjectRecord]:
    """Decode the subject records of one clean chunk."""
    _, meta, arrays = read_container(path, magic=CLEAN_MAGIC, error=DatasetFormatError)
    try:
        subjects = [VirtualSubject.model_validate(s) for s in meta["subjects"]]
        offsets = arrays["beat_offsets"]
        apw, ppg = arrays["apw"], arrays["ppg"]
        sbp, dbp = arrays["sbp"], arrays["dbp"]
    except (KeyError, ValidationError) as exc:
        raise DatasetFormatError(f"Malformed clean chunk {path}: {exc}") from exc
    if offsets.size != len(subjects) + 1:
        raise DatasetFormatError(f"Clean chunk {path} has inconsistent beat offsets")
    return [
        SubjectRecord(
            subject=s,
            apw_beat=apw[offsets[i] : offsets[i + 1]].astype(np.float64),
            ppg_beat=ppg[offsets[i] : offsets[i + 1]].astype(np.float64),
            sbp=float(sbp[i]),
            dbp=float(dbp[i]),
        )
        for i, s in enumerate(subjects)
    ]


def _chunk_is_current(directory: Path, info: ChunkInfo) -> bool:
    path = directory / info.file
    return path.is_file() and sha256_file(path) == info.sha256


def generate_dataset(
    out_dir: Path,
    n: int,
    prior: PriorSpec,
    net: ArterialNetwork,
    cfg: SolverConfig,
    seed: int,
    *,
    acceptance: AcceptanceFilter | None = None,
    chunk_size: int | None = None,
    threads: int | None = None,
) -> DatasetMetadata:
    """Generate (or resume) a clean dataset of *n* attempted subjects.

    Subjects ``[k*chunk_size, (k+1)*chunk_size)`` form chunk ``k``. Chunks
    already on disk whose digest matches the recorded metadata are kept,
    so an interrupted run resumes where it stopped.
    """
    if n < 1:
        raise DomainError("n must be at least 1")
    flt = acceptance or AcceptanceFilter()
    size = chunk_size or settings.chunk_size
    out_dir.mkdir(parents=True, exist_ok=True)

    done: dict[int, ChunkInfo] = {}
    if (out_dir / METADATA_FILE).is_file():
        previous = read_metadata(out_dir)
        same_run = (
            previous.kind is DatasetKind.CLEAN
            and previous.seed == seed
            and previous.chunk_size == size
            and previous.prior == prior
            and previous.solver == cfg
            and previous.acceptance == flt
        )
        if same_run:
            done = {c.index: c for c in previous.chunks if _chunk_is_current(out_dir, c)}
        else:
            logger.warning("Existing dataset in %s has different settings; regenerating", out_dir)

    meta = DatasetMetadata(
        kind=DatasetKind.CLEAN,
        tool_version=__version__,
        seed=seed,
        chunk_size=size,
        n_requested=n,
        prior=prior,
        acceptance=flt,
        solver=cfg,
        network=network_to_dict(net),
    )
    n_chunks = -(-n // size)
    for k in range(n_chunks):
        lo, hi = k * size, min(n, (k + 1) * size)
        if k in done and (done[k].first_subject, done[k].stop_subject) == (lo, hi):
            logger.info("Chunk %d already complete, skipping", k)
            meta.chunks.append(done[k])
            continue
        batch = generate_population(
            range(lo, hi), prior, net, cfg, seed, acceptance=flt, threads=threads
        )
        chunk_meta, arrays = _encode_clean_chunk(batch.records)
        chunk_meta["chunk"] = k
        path = out_dir / chunk_name(k)
        write_container(path, CLEAN_MAGIC, chunk_meta, arrays)
        meta.chunks.append(
            ChunkInfo(
                index=k,
                file=path.name,
                first_subject=lo,
                stop_subject=hi,
                records=batch.accepted,
                sha256=sha256_file(path),
                attempted=batch.attempted,
                rejected=batch.rejected,
                failed=batch.failed,
            )
        )
        # Progress is persisted per chunk for resumption
        _write_metadata(out_dir, meta)

    meta.complete = True
    _write_metadata(out_dir, meta)
    logger.info(
        "Dataset %s: %d/%d subjects accepted (%.1f%%)",
        out_dir,
        meta.records,
        meta.attempted,
        100.0 * meta.acceptance_rate,
    )
    return meta


def iter_clean_records(directory: Path) -> Iterator[SubjectRecord]:
    """Yield subject records of a complete clean dataset in chunk order."""
    meta = read_metadata(directory)
    if meta.kind is not DatasetKind.CLEAN:
        raise DatasetFormatError(f"{directory} holds '{meta.kind}' data, expected clean beats")
    if not meta.complete:
        raise DatasetFormatError(f"{directory} is incomplete; resume the generation first")
    for info in meta.chunks:
        yield from read_clean_chunk(directory / info.file)


# ---------------------------------------------------------------------------
# Finalization
# ---------------------------------------------------------------------------


def _finalize_record(
    record: SubjectRecord, noise: NoiseSpec, seed: int
) -> dict[str, Any]:
    sid = record.subject.subject_id

    def stream(k: int) -> np.random.SeedSequence:
        return np.random.SeedSequence([seed, sid, k])

    n_beat = record.apw_beat.size
    offset = int(np.random.default_rng(stream(_CROP_STREAM)).integers(0, n_beat))
    apw = stack_and_crop(record.apw_beat, offset=offset, modality=Modality.APW, subject_id=sid)
    ppg = stack_and_crop(record.ppg_beat, offset=offset, modality=Modality.PPG, subject_id=sid)
    apw = bandpass(apply_noise(apw, noise, stream(_APW_NOISE_STREAM)))
    ppg = bandpass(apply_noise(ppg, noise, stream(_PPG_NOISE_STREAM)))
    rec_apw = apw.noise_record or NoiseRecord(additive=False, flipped=False)
    rec_ppg = ppg.noise_record or NoiseRecord(additive=False, flipped=False)
    return {
        "apw": apw.samples,
        "ppg": ppg.samples,
        "biomarkers": np.array(record.subject.biomarkers()),
        "age": record.subject.age,
        "subject_id": sid,
        "crop_offset": offset,
        "snr_apw": rec_apw.snr_db,
        "snr_ppg": rec_ppg.snr_db,
        "flip_apw": rec_apw.flipped,
        "flip_ppg": rec_ppg.flipped,
        "additive_apw": rec_apw.additive,
        "additive_ppg": rec_ppg.additive,
    }


def _stack_rows(rows: list[dict[str, Any]]) -> dict[str, np.ndarray]:
    def col(key: str, dtype: str) -> np.ndarray:
        return np.array([r[key] for r in rows], dtype=dtype)

    n = len(rows)
    return {
        "apw": np.array([r["apw"] for r in rows], dtype="<f4").reshape(n, SEGMENT_LENGTH),
        "ppg": np.array([r["ppg"] for r in rows], dtype="<f4").reshape(n, SEGMENT_LENGTH),
        "biomarkers": np.array([r["biomarkers"] for r in rows], dtype="<f8").reshape(n, 4),
        "age": col("age", "<f8"),
        "subject_id": col("subject_id", "<i8"),
        "crop_offset": col("crop_offset", "<i8"),
        "snr_apw": col("snr_apw", "<f8"),
        "snr_ppg": col("snr_ppg", "<f8"),
        "flip_apw": col("flip_apw", "<u1"),
        "flip_ppg": col("flip_ppg", "<u1"),
        "additive_apw": col("additive_apw", "<u1"),
        "additive_ppg": col("additive_ppg", "<u1"),
    }


def make_split(
    n: int, fractions: tuple[float, float, float] = DEFAULT_SPLIT, seed: int = 0
) -> SplitIndices:
    """Seeded random partition of ``range(n)`` into train/validation/test rows."""
    perm = np.random.default_rng(np.random.SeedSequence([seed, n])).permutation(n)
    n_train = int(round(fractions[0] * n))
    n_val = min(n - n_train, int(round(fractions[1] * n)))
    return SplitIndices(
        fractions=fractions,
        seed=seed,
        train=sorted(int(i) for i in perm[:n_train]),
        validation=sorted(int(i) for i in perm[n_train : n_train + n_val]),
        test=sorted(int(i) for i in perm[n_train + n_val :]),
    )


def finalize_dataset(
    in_dir: Path,
    out_dir: Path,
    noise: NoiseSpec,
    seed: int,
    *,
    split: tuple[float, float, float] = DEFAULT_SPLIT,
) -> DatasetMetadata:
    """Turn clean beats into noisy, band-passed 1000-sample segments.

    For each subject the APW and PPG are cropped at the same offset, each
    gets its own noise stream, and both are band-passed. Every random draw
    depends only on ``(seed, subject_id)``.
    """
    source = read_metadata(in_dir)
    if source.kind is not DatasetKind.CLEAN or not source.complete:
        raise DatasetFormatError(f"{in_dir} is not a complete clean dataset")
    out_dir.mkdir(parents=True, exist_ok=True)
    meta = DatasetMetadata(
        kind=DatasetKind.SEGMENTS,
        tool_version=__version__,
        seed=seed,
        chunk_size=source.chunk_size,
        n_requested=source.n_requested,
        prior=source.prior,
        acceptance=source.acceptance,
        solver=source.solver,
        network=source.network,
        noise=noise,
        source=in_dir.as_posix(),
    )
    total = 0
    for info in source.chunks:
        rows = [_finalize_record(r, noise, seed) for r in read_clean_chunk(in_dir / info.file)]
        path = out_dir / chunk_name(info.index)
        write_container(path, SEGMENTS_MAGIC, {"chunk": info.index}, _stack_rows(rows))
        meta.chunks.append(info.model_copy(update={"file": path.name, "sha256": sha256_file(path)}))
        total += len(rows)
        logger.debug("Finalized chunk %d (%d segments)", info.index, len(rows))
    meta.split = make_split(total, split, seed)
    meta.complete = True
    _write_metadata(out_dir, meta)
    logger.info("Finalized %d segments into %s (noise mode %s)", total, out_dir, noise.mode)
    return meta


# ---------------------------------------------------------------------------
# Loading
# ---------------------------------------------------------------------------


@dataclass
class SegmentDataset:
    """In-memory segments of a finalized dataset, row-aligned."""

    apw: npt.NDArray[np.float32]
    ppg: npt.NDArray[np.float32]
    biomarkers: FloatArray  # (n, 4) in BIOMARKERS order
    age: FloatArray
    subject_id: npt.NDArray[np.int64]
    snr_apw: FloatArray
    snr_ppg: FloatArray
    flipped_apw: npt.NDArray[np.bool_] = field(default_factory=lambda: np.zeros(0, dtype=bool))
    flipped_ppg: npt.NDArray[np.bool_] = field(default_factory=lambda: np.zeros(0, dtype=bool))
    split: SplitIndices | None = None

    def __len__(self) -> int:
        return int(self.biomarkers.shape[0])

    def signals(self, modality: Modality) -> npt.NDArray[np.float32]:
        return self.apw if modality is Modality.APW else self.ppg

    def snr(self, modality: Modality) -> FloatArray:
        return self.snr_apw if modality is Modality.APW else self.snr_ppg

    def subset(self, rows: npt.ArrayLike) -> SegmentDataset:
        """Rows *rows* as a new dataset (without a split)."""
        idx = np.asarray(rows, dtype=np.int64)
        return SegmentDataset(
            apw=self.apw[idx],
            ppg=self.ppg[idx],
            biomarkers=self.biomarkers[idx],
            age=self.age[idx],
            subject_id=self.subject_id[idx],
            snr_apw=self.snr_apw[idx],
            snr_ppg=self.snr_ppg[idx],
            flipped_apw=self.flipped_apw[idx] if self.flipped_apw.size else self.flipped_apw,
            flipped_ppg=self.flipped_ppg[idx] if self.flipped_ppg.size else self.flipped_ppg,
        )

    def part(self, name: str) -> SegmentDataset:
        """Train, validation or test rows according to the recorded split."""
        if self.split is None:
            raise DatasetFormatError("Dataset has no recorded split")
        return self.subset(self.split.rows(name))

    @classmethod
    def empty(cls) -> SegmentDataset:
        z = np.zeros(0)
        return cls(
            apw=np.zeros((0, SEGMENT_LENGTH), dtype=np.float32),
            ppg=np.zeros((0, SEGMENT_LENGTH), dtype=np.float32),
            biomarkers=np.zeros((0, 4)),
            age=z,
            subject_id=np.zeros(0, dtype=np.int64),
            snr_apw=z,
            snr_ppg=z,
        )


def load_segments(directory: Path) -> SegmentDataset:
    """Load every chunk of a finalized dataset into memory."""
    meta = read_metadata(directory)
    if meta.kind is not DatasetKind.SEGMENTS or not meta.complete:
        raise DatasetFormatError(f"{directory} is not a complete finalized dataset")
    parts: list[dict[str, np.ndarray]] = []
    for info in meta.chunks:
        _, _, arrays = read_container(
            directory / info.file, magic=SEGMENTS_MAGIC, error=DatasetFormatError
        )
        if arrays.get("apw") is None or arrays["apw"].shape[0] != info.records:
            raise DatasetFormatError(f"Chunk {info.file} does not match its metadata")
        parts.append(arrays)
    if not parts or sum(info.records for info in meta.chunks) == 0:
        ds = SegmentDataset.empty()
        ds.split = meta.split
        return ds

    def cat(key: str) -> np.ndarray:
        return np.concatenate([p[key] for p in parts])

    return SegmentDataset(
        apw=cat("apw").astype(np.float32),
        ppg=cat("ppg").astype(np.float32),
        biomarkers=cat("biomarkers").astype(np.float64),
        age=cat("age").astype(np.float64),
        subject_id=cat("subject_id").astype(np.int64),
        snr_apw=cat("snr_apw").astype(np.float64),
        snr_ppg=cat("snr_ppg").astype(np.float64),
        flipped_apw=cat("flip_apw").astype(bool),
        flipped_ppg=cat("flip_ppg").astype(bool),
        split=meta.split,
    )
