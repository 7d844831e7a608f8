"""Virtual-subject sampling, personalization and batch simulation."""

from __future__ import annotations

import logging
import math
from collections.abc import Iterable, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt

from hemo_sbi.core.config import settings
from hemo_sbi.core.exceptions import (
    DomainError,
    HemoError,
    NetworkConfigError,
    PriorInconsistencyError,
)
from hemo_sbi.schemas.network import ArterialNetwork
from hemo_sbi.schemas.population import (
    AcceptanceDecision,
    AcceptanceFilter,
    PriorSpec,
    StiffnessSpec,
    VirtualSubject,
)
from hemo_sbi.schemas.solver import ProbeQuantity, ProbeRequest, SolverConfig
from hemo_sbi.services.signal_pipeline import beat_length, derive_ppg
from hemo_sbi.services.solver import run_simulation
from hemo_sbi.services.units import MMHG_TO_PA
from hemo_sbi.services.vascular_model import check_heart_function, scale_network_to_height

logger = logging.getLogger(__name__)

FloatArray = npt.NDArray[np.float64]

MAX_PRIOR_ATTEMPTS = 1000

_APW_PROBE = "apw"
_VOLUME_PROBE = "bed_volume"
_AORTA_PROBE = "aortic_pressure"


# ---------------------------------------------------------------------------
# Closed-form relations
# ---------------------------------------------------------------------------


def lvet_ms(
    heart_rate: float,
    stroke_volume_ml: float,
    offset_ms: float = 0.0,
    hr_noise: float = 0.0,
    sv_noise: float = 0.0,
) -> float:
    """Empirical LVET ``(244 + e1) - (0.926 + e2) HR + (1.08 + e3) SV`` in ms."""
    return (
        (244.0 + offset_ms)
        - (0.926 + hr_noise) * heart_rate
        + (1.08 + sv_noise) * stroke_volume_ml
    )


def k3_of_age(age: float, spec: StiffnessSpec | None = None) -> float:
    """Age-dependent stiffness constant ``k3`` (Pa)."""
    s = spec or StiffnessSpec()
    return s.k3_reference * (1.0 + s.k3_age_slope * (age - s.reference_age))


def wall_stiffness(distal_radius: float, k1: float, k2: float, k3: float) -> float:
    """``Eh = R_d (k1 exp(k2 R_d) + k3)`` in Pa*m.

    Raises
    ------
    DomainError
        If *distal_radius* is not positive.
    """
    if distal_radius <= 0:
        raise DomainError("Distal radius must be positive")
    return distal_radius * (k1 * math.exp(k2 * distal_radius) + k3)


def subject_seed(batch_seed: int, index: int) -> np.random.SeedSequence:
    """Independent stream for subject *index* of a batch."""
    return np.random.SeedSequence([batch_seed, index])


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------


def sample_subject(
    prior: PriorSpec, seed: int | np.random.SeedSequence, subject_id: int = 0
) -> VirtualSubject:
    """Draw one subject from *prior*, resampling invalid heart functions.

    Raises
    ------
    PriorInconsistencyError
        After 1000 consecutive draws that violate the heart-function rules.
    """
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    rng = np.random.default_rng(ss)
    entropy = ss.entropy
    seed_words = tuple(int(v) for v in (entropy if isinstance(entropy, Sequence) else [entropy]))
    seed_words += tuple(int(v) for v in ss.spawn_key)

    def u(name: str) -> float:
        rng_ = getattr(prior, name)
        return float(rng.uniform(rng_.low, rng_.high))

    for _ in range(MAX_PRIOR_ATTEMPTS):
        hr = u("heart_rate")
        sv = u("stroke_volume_ml")
        pft = u("peak_flow_time")
        rfv = u("reverse_flow_fraction")
        height = u("height_cm")
        age = u("age")
        e1 = u("lvet_offset_ms")
        e2 = u("lvet_hr_noise")
        e3 = u("lvet_sv_noise")
        scale = u("bed_resistance_scale")
        position = u("probe_position")
        site = prior.measurement_sites[int(rng.integers(0, len(prior.measurement_sites)))]
        height_noise = float(rng.normal(0.0, prior.height_noise_sd_cm)) if prior.height_noise_sd_cm > 0 else 0.0

        lvet = lvet_ms(hr, sv, e1, e2, e3)
        if lvet <= 0 or height + height_noise <= 0:
            continue
        subject = VirtualSubject(
            subject_id=subject_id,
            heart_rate=hr,
            stroke_volume_ml=sv,
            lvet_ms=lvet,
            peak_flow_time=pft,
            reverse_flow_fraction=rfv,
            height_cm=height,
            height_noise_cm=height_noise,
            age=age,
            lvet_offset_ms=e1,
            lvet_hr_noise=e2,
            lvet_sv_noise=e3,
            bed_resistance_scale=scale,
            measurement_site=site,
            probe_position=position,
            rng_seed=seed_words,
        )
        if not check_heart_function(subject.heart_function()):
            return subject
    raise PriorInconsistencyError(
        f"{MAX_PRIOR_ATTEMPTS} consecutive draws violated the heart-function rules"
    )


def personalize_network(
    net: ArterialNetwork, subject: VirtualSubject, prior: PriorSpec
) -> ArterialNetwork:
    """Apply height scaling, age-dependent stiffness and bed scaling.

    Lengths scale with ``(height + noise) / 170``; each segment's elastic
    modulus becomes ``Eh(R_d, age) / h0``; every distal bed resistance is
    multiplied by ``subject.bed_resistance_scale``.
    """
    scaled = scale_network_to_height(net, subject.height_cm, subject.height_noise_cm)
    st = prior.stiffness
    k3 = k3_of_age(subject.age, st)
    segments = {
        sid: seg.model_copy(
            update={
                "elastic_modulus": wall_stiffness(seg.distal_radius, st.k1, st.k2, k3)
                / seg.wall_thickness
            }
        )
        for sid, seg in scaled.segments.items()
    }
    beds = {
        bid: bed.model_copy(
            update={"distal_resistance": bed.distal_resistance * subject.bed_resistance_scale}
        )
        for bid, bed in scaled.beds.items()
    }
    return scaled.model_copy(update={"segments": segments, "beds": beds})


# ---------------------------------------------------------------------------
# Filtering
# ---------------------------------------------------------------------------


def accepts(sbp: float, dbp: float, f: AcceptanceFilter | None = None) -> bool:
    """Reject iff ``DBP > dbp_max`` or ``SBP`` is outside ``[sbp_min, sbp_max]``."""
    flt = f or AcceptanceFilter()
    return not (dbp > flt.dbp_max or sbp < flt.sbp_min or sbp > flt.sbp_max)


def apply_acceptance_filter(
    apw_beat_mmhg: npt.ArrayLike, f: AcceptanceFilter | None = None
) -> AcceptanceDecision:
    """Filter a clean single-beat APW (mmHg) on its systolic and diastolic values."""
    beat = np.asarray(apw_beat_mmhg, dtype=float)
    sbp, dbp = float(beat.max()), float(beat.min())
    return AcceptanceDecision(accepted=accepts(sbp, dbp, f), sbp=sbp, dbp=dbp)


# ---------------------------------------------------------------------------
# Batch generation
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SubjectRecord:
    """An accepted subject and its clean single-beat signals."""

    subject: VirtualSubject
    apw_beat: FloatArray  # mmHg
    ppg_beat: FloatArray  # normalized to [0, 1]
    sbp: float
    dbp: float


@dataclass(frozen=True, eq=False)
class SubjectOutcome:
    """Result of simulating one subject: a record, a rejection or a failure."""

    index: int
    record: SubjectRecord | None = None
    rejected: bool = False
    error: str | None = None


@dataclass
class PopulationBatch:
    """Accepted records of a batch plus acceptance bookkeeping."""

    records: list[SubjectRecord] = field(default_factory=list)
    attempted: int = 0
    rejected: int = 0
    failed: int = 0

    @property
    def accepted(self) -> int:
        return len(self.records)

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.attempted if self.attempted else 0.0


def measurement_probes(net: ArterialNetwork, subject: VirtualSubject) -> list[ProbeRequest]:
    """Probes for the APW site, its terminal bed volume and the aortic root."""
    site = net.segments.get(subject.measurement_site)
    if site is None or site.terminal_bed is None:
        raise NetworkConfigError(
            f"Measurement site '{subject.measurement_site}' must be a segment with a terminal bed"
        )
    return [
        ProbeRequest(segment_id=site.id, position=subject.probe_position, label=_APW_PROBE),
        ProbeRequest(
            segment_id=site.id, quantity=ProbeQuantity.BED_VOLUME, label=_VOLUME_PROBE
        ),
        ProbeRequest(segment_id=net.root, position=0.0, label=_AORTA_PROBE),
    ]


def simulate_subject(
    subject: VirtualSubject,
    net: ArterialNetwork,
    prior: PriorSpec,
    cfg: SolverConfig,
    acceptance: AcceptanceFilter,
) -> SubjectOutcome:
    """Simulate, extract the last beat, compute SVR and filter one subject.

    Solver and signal failures are logged and returned as a failed outcome.
    """
    try:
        personal = personalize_network(net, subject, prior)
        result = run_simulation(
            personal, subject.heart_function(), cfg, measurement_probes(personal, subject)
        )
        n = beat_length(subject.heart_rate, cfg.output_sample_rate)
        apw = result.last_beat(_APW_PROBE, n) / MMHG_TO_PA
        volume = result.last_beat(_VOLUME_PROBE, n)
        aortic = result.last_beat(_AORTA_PROBE, n)
        ppg = derive_ppg(volume)
    except HemoError as exc:
        logger.warning(
            "Subject %d failed [%s:%s]: %s", subject.subject_id, exc.module, exc.code, exc.message
        )
        return SubjectOutcome(index=subject.subject_id, error=f"{exc.module}:{exc.code}")

    p_out = float(np.mean([b.outflow_pressure for b in personal.beds.values()]))
    svr = (float(np.mean(aortic)) - p_out) / subject.cardiac_output_si
    decision = apply_acceptance_filter(apw, acceptance)
    if not decision.accepted:
        logger.debug(
            "Subject %d rejected (SBP %.1f, DBP %.1f)", subject.subject_id, decision.sbp, decision.dbp
        )
        return SubjectOutcome(index=subject.subject_id, rejected=True)
    record = SubjectRecord(
        subject=subject.model_copy(update={"svr": svr}),
        apw_beat=apw,
        ppg_beat=ppg,
        sbp=decision.sbp,
        dbp=decision.dbp,
    )
    return SubjectOutcome(index=subject.subject_id, record=record)


def _simulate_index(
    args: tuple[int, int, PriorSpec, ArterialNetwork, SolverConfig, AcceptanceFilter],
) -> SubjectOutcome:
    index, batch_seed, prior, net, cfg, acceptance = args
    try:
        subject = sample_subject(prior, subject_seed(batch_seed, index), subject_id=index)
    except PriorInconsistencyError as exc:
        logger.warning("Subject %d: %s", index, exc.message)
        return SubjectOutcome(index=index, error=f"{exc.module}:{exc.code}")
    return simulate_subject(subject, net, prior, cfg, acceptance)


def generate_population(
    indices: Iterable[int],
    prior: PriorSpec,
    net: ArterialNetwork,
    cfg: SolverConfig,
    seed: int,
    *,
    acceptance: AcceptanceFilter | None = None,
    threads: int | None = None,
) -> PopulationBatch:
    """Sample, simulate and filter the subjects with the given *indices*.

    Each subject's stream depends only on ``(seed, index)``, so any
    partition of the index range into chunks produces the same records.

    Parameters
    ----------
    indices:
        Subject indices to attempt (e.g. ``range(0, 256)`` for one chunk).
    threads:
        Worker processes; defaults to ``settings.effective_threads``.
    """
    flt = acceptance or AcceptanceFilter()
    workers = settings.effective_threads if threads is None else max(1, threads)
    tasks = [(i, seed, prior, net, cfg, flt) for i in indices]
    batch = PopulationBatch(attempted=len(tasks))
    if workers == 1 or len(tasks) <= 1:
        outcomes = [_simulate_index(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_simulate_index, tasks))
    for outcome in outcomes:
        if outcome.record is not None:
            batch.records.append(outcome.record)
        elif outcome.rejected:
            batch.rejected += 1
        else:
            batch.failed += 1
    logger.info(
        "Population batch: %d attempted, %d accepted, %d rejected, %d failed",
        batch.attempted,
        batch.accepted,
        batch.rejected,
        batch.failed,
    )
    return batch
