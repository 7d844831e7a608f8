"""Beat stacking, measurement noise, PPG derivation, filtering and SNR."""

from __future__ import annotations

import logging
import math
from dataclasses import replace
from functools import lru_cache

import numpy as np
import numpy.typing as npt
from scipy import signal

from hemo_sbi.core.exceptions import DegenerateSignalError, DomainError
from hemo_sbi.schemas.signals import (
    SAMPLE_RATE,
    SEGMENT_LENGTH,
    SNR_SATURATION_DB,
    Modality,
    NoiseMode,
    NoisePlan,
    NoiseRecord,
    NoiseSpec,
    WaveformSegment,
)

logger = logging.getLogger(__name__)

FloatArray = npt.NDArray[np.float64]
Seed = int | np.random.SeedSequence | None

BANDPASS_LOW_HZ = 0.5
BANDPASS_HIGH_HZ = 10.0
BANDPASS_ORDER = 2


def beat_length(heart_rate: float, sample_rate: float = SAMPLE_RATE) -> int:
    """Samples per beat, ``round(fs * 60 / HR)``."""
    return int(round(sample_rate * 60.0 / heart_rate))


# ---------------------------------------------------------------------------
# Stacking
# ---------------------------------------------------------------------------


def stack_and_crop(
    beat: npt.ArrayLike,
    seed: Seed = None,
    *,
    offset: int | None = None,
    modality: Modality = Modality.APW,
    subject_id: int = -1,
) -> WaveformSegment:
    """Tile a single beat and crop a 1000-sample segment.

    The crop offset is drawn uniformly in ``[0, len(beat))`` from *seed*
    unless *offset* is given, so every phase within the beat can start the
    segment. Passing the same *offset* for two modalities keeps them aligned.
    """
    b = np.asarray(beat, dtype=float)
    if b.ndim != 1 or b.size == 0:
        raise DomainError("Beat must be a non-empty 1-D series")
    n = b.size
    if offset is None:
        offset = int(np.random.default_rng(seed).integers(0, n))
    if offset < 0:
        raise DomainError(f"Crop offset must be non-negative, got {offset}")
    reps = math.ceil((SEGMENT_LENGTH + offset) / n) + 1
    tiled = np.tile(b, reps)
    return WaveformSegment(
        samples=tiled[offset : offset + SEGMENT_LENGTH].copy(),
        modality=modality,
        subject_id=subject_id,
        crop_offset=offset,
    )


# ---------------------------------------------------------------------------
# Noise
# ---------------------------------------------------------------------------


def draw_noise_plan(spec: NoiseSpec, rng: np.random.Generator, n: int = SEGMENT_LENGTH) -> NoisePlan:
    """Draw which noises apply, their intensities and the noisy window.

    The draw order is fixed so that a plan is reproducible from the
    generator state alone.
    """
    if spec.mode is NoiseMode.NONE:
        return NoisePlan(additive=False, flipped=False)
    if spec.mode is NoiseMode.FIXED:
        return NoisePlan(
            additive=True,
            flipped=False,
            gaussian_intensity=spec.fixed_intensity,
            red_intensity=spec.fixed_intensity,
            window_start=0,
            window_stop=n,
        )

    additive = bool(rng.random() < spec.p_additive)
    flipped = bool(rng.random() < spec.p_flip)
    g_int = float(rng.exponential(spec.gaussian_intensity_mean))
    r_int = float(rng.exponential(spec.red_intensity_mean))
    frac = rng.uniform(spec.window_fraction.low, spec.window_fraction.high)
    width = min(n, max(1, int(round(frac * n))))
    start = int(rng.integers(0, n - width + 1))
    if not additive:
        g_int = r_int = 0.0
        start = width = 0
    return NoisePlan(
        additive=additive,
        flipped=flipped,
        gaussian_intensity=g_int,
        red_intensity=r_int,
        window_start=start,
        window_stop=start + width,
    )


def red_noise(rng: np.random.Generator, n: int, coefficient: float) -> FloatArray:
    """Unit-variance stationary AR(1) noise ``x[k] = a x[k-1] + sqrt(1-a^2) e[k]``."""
    white = rng.standard_normal(n)
    x0 = rng.standard_normal()
    b = [math.sqrt(1.0 - coefficient * coefficient)]
    a = [1.0, -coefficient]
    out, _ = signal.lfilter(b, a, white, zi=[coefficient * x0])
    return np.asarray(out, dtype=float)


def flip_signal(x: FloatArray, window: tuple[int, int] | None = None) -> FloatArray:
    """Vertical inversion about the mean, ``2 mean - x``, optionally on a window."""
    out = np.array(x, dtype=float, copy=True)
    lo, hi = window if window is not None else (0, out.size)
    part = out[lo:hi]
    out[lo:hi] = 2.0 * part.mean() - part
    return out


def apply_noise(seg: WaveformSegment, spec: NoiseSpec, seed: Seed) -> WaveformSegment:
    """Apply the measurement model to a clean segment.

    With probability ``p_additive`` Gaussian white noise and AR(1) red noise
    are added on a random contiguous window, each with standard deviation
    ``Exponential(mean) * std(segment)``. Independently, with probability
    ``p_flip`` the whole segment is inverted about its mean. The record's
    SNR counts the additive noise only.
    """
    rng = np.random.default_rng(seed)
    x = seg.samples
    n = x.size
    plan = draw_noise_plan(spec, rng, n)
    noise = np.zeros(n)
    g_sigma = r_sigma = 0.0
    if plan.additive:
        scale = float(np.std(x))
        g_sigma = plan.gaussian_intensity * scale
        r_sigma = plan.red_intensity * scale
        w = plan.window_stop - plan.window_start
        white = rng.standard_normal(w)
        red = red_noise(rng, w, spec.red_noise_coefficient)
        noise[plan.window_start : plan.window_stop] = g_sigma * white + r_sigma * red

    noisy = x + noise
    snr_db = snr(x, noisy) if plan.additive else SNR_SATURATION_DB
    if plan.flipped:
        noisy = flip_signal(noisy)
    record = NoiseRecord(
        **plan.model_dump(), gaussian_sigma=g_sigma, red_sigma=r_sigma, snr_db=snr_db
    )
    return replace(seg, samples=noisy, noise_record=record)


# ---------------------------------------------------------------------------
# PPG, filtering, SNR
# ---------------------------------------------------------------------------


def derive_ppg(bed_volume: npt.ArrayLike) -> FloatArray:
    """Normalize a Windkessel volume trace to ``[0, 1]``.

    Raises
    ------
    DegenerateSignalError
        If the volume is constant.
    """
    v = np.asarray(bed_volume, dtype=float)
    if v.size < 2:
        raise DegenerateSignalError("PPG needs at least two volume samples")
    lo, hi = float(v.min()), float(v.max())
    if not hi > lo:
        raise DegenerateSignalError("Bed volume is constant; no pulsatile component")
    return (v - lo) / (hi - lo)


@lru_cache(maxsize=4)
def bandpass_sos(sample_rate: float = SAMPLE_RATE) -> FloatArray:
    """Second-order Butterworth band-pass (0.5-10 Hz) as second-order sections."""
    return np.asarray(
        signal.butter(
            BANDPASS_ORDER,
            [BANDPASS_LOW_HZ, BANDPASS_HIGH_HZ],
            btype="bandpass",
            fs=sample_rate,
            output="sos",
        )
    )


def bandpass_filter(x: npt.ArrayLike, sample_rate: float = SAMPLE_RATE) -> FloatArray:
    """Zero-phase (forward-backward) band-pass of an arbitrary-length series."""
    # sosfiltfilt needs a writable buffer; the cached design is shared
    sos = np.array(bandpass_sos(sample_rate), dtype=float, copy=True)
    return np.asarray(signal.sosfiltfilt(sos, np.asarray(x, dtype=float)))


def bandpass(seg: WaveformSegment) -> WaveformSegment:
    """Band-pass a segment, keeping its provenance."""
    return replace(seg, samples=bandpass_filter(seg.samples, seg.sample_rate))


def _power(x: FloatArray) -> float:
    centred = x - x.mean()
    return float(np.mean(centred * centred))


def snr(clean: npt.ArrayLike | WaveformSegment, noisy: npt.ArrayLike | WaveformSegment) -> float:
    """``10 log10(P_clean / P_noise)`` with mean-removed powers, in dB.

    Zero noise power saturates at +100 dB.
    """
    c = clean.samples if isinstance(clean, WaveformSegment) else np.asarray(clean, dtype=float)
    y = noisy.samples if isinstance(noisy, WaveformSegment) else np.asarray(noisy, dtype=float)
    if c.shape != y.shape:
        raise DomainError("SNR needs signals of equal length")
    p_noise = _power(y - c)
    p_signal = _power(c)
    if p_signal == 0.0:
        raise DegenerateSignalError("Clean signal has zero power")
    if p_noise == 0.0:
        return SNR_SATURATION_DB
    return float(min(SNR_SATURATION_DB, 10.0 * math.log10(p_signal / p_noise)))
