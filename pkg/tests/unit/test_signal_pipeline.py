"""Tests for beat stacking, the noise model, PPG derivation, band-pass and SNR."""

from __future__ import annotations

import numpy as np
import pytest
from scipy import signal, stats

from hemo_sbi.core.exceptions import DegenerateSignalError, DomainError
from hemo_sbi.schemas.signals import (
    SEGMENT_LENGTH,
    SNR_SATURATION_DB,
    Modality,
    NoiseMode,
    NoiseSpec,
    WaveformSegment,
)
from hemo_sbi.services.signal_pipeline import (
    apply_noise,
    bandpass,
    bandpass_filter,
    bandpass_sos,
    beat_length,
    derive_ppg,
    draw_noise_plan,
    flip_signal,
    red_noise,
    snr,
    stack_and_crop,
)


def _beat(n: int = 100) -> np.ndarray:
    phase = np.arange(n) / n
    return 80.0 + 40.0 * np.exp(-((phase - 0.25) ** 2) / 0.004)


def _segment() -> WaveformSegment:
    return stack_and_crop(_beat(), offset=0)


class TestStacking:
    """Tile one beat and crop 1000 samples."""

    def test_beat_length(self) -> None:
        assert beat_length(75.0) == 100
        assert beat_length(60.0) == 125

    def test_crop_is_periodic_continuation(self) -> None:
        beat = _beat(100)
        seg = stack_and_crop(beat, offset=37)
        assert seg.samples.shape == (SEGMENT_LENGTH,)
        assert seg.crop_offset == 37
        expected = beat[(np.arange(SEGMENT_LENGTH) + 37) % 100]
        assert np.array_equal(seg.samples, expected)

    def test_seeded_offset_is_reproducible_and_in_range(self) -> None:
        beat = _beat(93)
        a = stack_and_crop(beat, 11)
        b = stack_and_crop(beat, 11)
        assert a.crop_offset == b.crop_offset
        assert 0 <= a.crop_offset < 93

    def test_seeded_offsets_are_uniform(self) -> None:
        beat = _beat(50)
        offsets = [stack_and_crop(beat, seed).crop_offset for seed in range(5000)]
        counts = np.bincount(offsets, minlength=50)
        assert counts.size == 50
        assert stats.chisquare(counts).pvalue > 0.01

    def test_long_beat_is_tiled_enough(self) -> None:
        seg = stack_and_crop(np.arange(1500.0), offset=1499)
        assert seg.samples[0] == 1499.0
        assert seg.samples[1] == 0.0

    def test_empty_beat(self) -> None:
        with pytest.raises(DomainError):
            stack_and_crop(np.zeros(0), offset=0)

    def test_segment_length_enforced(self) -> None:
        with pytest.raises(ValueError):
            WaveformSegment(samples=np.zeros(999), modality=Modality.APW)


class TestNoise:
    """Stochastic measurement model."""

    def test_none_mode_is_identity(self) -> None:
        seg = _segment()
        noisy = apply_noise(seg, NoiseSpec(mode=NoiseMode.NONE), 3)
        assert np.array_equal(noisy.samples, seg.samples)
        assert noisy.noise_record is not None
        assert noisy.noise_record.snr_db == SNR_SATURATION_DB

    def test_same_seed_same_noise(self) -> None:
        seg = _segment()
        a = apply_noise(seg, NoiseSpec(), 42)
        b = apply_noise(seg, NoiseSpec(), 42)
        assert np.array_equal(a.samples, b.samples)
        assert a.noise_record == b.noise_record

    def test_noise_is_confined_to_window(self) -> None:
        seg = _segment()
        spec = NoiseSpec(p_additive=1.0, p_flip=0.0)
        noisy = apply_noise(seg, spec, 7)
        rec = noisy.noise_record
        assert rec is not None and rec.additive
        diff = noisy.samples - seg.samples
        outside = np.ones(SEGMENT_LENGTH, dtype=bool)
        outside[rec.window_start : rec.window_stop] = False
        assert np.all(diff[outside] == 0.0)
        assert np.any(diff[~outside] != 0.0)
        width = rec.window_stop - rec.window_start
        assert 0.25 * SEGMENT_LENGTH - 1 <= width <= SEGMENT_LENGTH

    def test_snr_matches_record(self) -> None:
        seg = _segment()
        noisy = apply_noise(seg, NoiseSpec(p_additive=1.0, p_flip=0.0), 5)
        assert noisy.noise_record is not None
        assert noisy.noise_record.snr_db == pytest.approx(snr(seg, noisy))

    def test_flip_only_leaves_snr_saturated(self) -> None:
        seg = _segment()
        noisy = apply_noise(seg, NoiseSpec(p_additive=0.0, p_flip=1.0), 5)
        rec = noisy.noise_record
        assert rec is not None and rec.flipped and not rec.additive
        assert rec.snr_db == SNR_SATURATION_DB
        assert np.allclose(noisy.samples, 2 * seg.samples.mean() - seg.samples)

    def test_fixed_mode_covers_full_segment(self) -> None:
        plan = draw_noise_plan(NoiseSpec(mode=NoiseMode.FIXED), np.random.default_rng(0))
        assert plan.additive and not plan.flipped
        assert (plan.window_start, plan.window_stop) == (0, SEGMENT_LENGTH)
        assert plan.gaussian_intensity == plan.red_intensity == 0.3

    def test_draw_frequencies_follow_probabilities(self) -> None:
        rng = np.random.default_rng(1)
        spec = NoiseSpec()
        plans = [draw_noise_plan(spec, rng) for _ in range(4000)]
        assert np.mean([p.additive for p in plans]) == pytest.approx(0.8, abs=0.03)
        assert np.mean([p.flipped for p in plans]) == pytest.approx(0.3, abs=0.03)

    @pytest.mark.slow
    def test_draw_frequencies_at_scale(self) -> None:
        rng = np.random.default_rng(2)
        spec = NoiseSpec()
        plans = [draw_noise_plan(spec, rng) for _ in range(100_000)]
        assert abs(np.mean([p.additive for p in plans]) - 0.8) <= 0.004
        assert abs(np.mean([p.flipped for p in plans]) - 0.3) <= 0.005

    def test_red_noise_is_unit_variance_and_correlated(self) -> None:
        x = red_noise(np.random.default_rng(0), 200_000, 0.95)
        assert x.std() == pytest.approx(1.0, abs=0.05)
        lag1 = np.corrcoef(x[:-1], x[1:])[0, 1]
        assert lag1 == pytest.approx(0.95, abs=0.01)

    def test_flip_window(self) -> None:
        x = np.arange(10.0)
        out = flip_signal(x, (2, 6))
        assert np.array_equal(out[:2], x[:2])
        assert np.array_equal(out[2:6], [5.0, 4.0, 3.0, 2.0])
        assert np.array_equal(out[6:], x[6:])


class TestPpgAndFiltering:
    """PPG normalization, band-pass and SNR."""

    def test_ppg_is_normalized(self) -> None:
        ppg = derive_ppg(np.array([2.0, 3.0, 6.0, 4.0]))
        assert ppg.min() == 0.0 and ppg.max() == 1.0
        assert ppg[1] == pytest.approx(0.25)

    def test_constant_volume_is_degenerate(self) -> None:
        with pytest.raises(DegenerateSignalError):
            derive_ppg(np.ones(50))

    def test_bandpass_design(self) -> None:
        sos = bandpass_sos()
        # Second-order band-pass: two sections
        assert sos.shape == (2, 6)
        w, h = signal.sosfreqz(sos, worN=[0.1, 2.0, 30.0], fs=125.0)
        gain = np.abs(h)
        assert gain[1] > 0.9
        assert gain[0] < 0.1 and gain[2] < 0.2

    def test_bandpass_removes_offset_and_keeps_pulse_band(self) -> None:
        t = np.arange(SEGMENT_LENGTH) / 125.0
        x = 100.0 + np.sin(2 * np.pi * 1.5 * t)
        y = bandpass_filter(x)
        # six full cycles
        core = slice(250, 750)
        assert abs(y[core].mean()) < 0.05
        assert np.std(y[core]) == pytest.approx(np.std(np.sin(2 * np.pi * 1.5 * t[core])), rel=0.1)

    def test_bandpass_is_zero_phase(self) -> None:
        t = np.arange(SEGMENT_LENGTH) / 125.0
        x = np.sin(2 * np.pi * 2.0 * t)
        y = bandpass_filter(x)
        core = slice(300, 700)
        lag = np.argmax(np.correlate(y[core], x[core], mode="full")) - (400 - 1)
        assert lag == 0

    def test_repeated_calls_reuse_the_design(self) -> None:
        x = np.sin(2 * np.pi * 5.0 * np.arange(SEGMENT_LENGTH) / 125.0)
        first = bandpass_filter(x)
        second = bandpass_filter(x)
        assert np.array_equal(first, second)
        assert bandpass_sos() is bandpass_sos()
        seg = stack_and_crop(_beat(), offset=0)
        assert np.array_equal(bandpass(seg).samples, bandpass(seg).samples)

    @pytest.mark.parametrize(
        ("freq", "n", "core"),
        [(5.0, 3750, slice(1250, 2500)), (0.05, 20_000, slice(5000, 15_000))],
    )
    def test_tone_response(self, freq: float, n: int, core: slice) -> None:
        t = np.arange(n) / 125.0
        x = np.sin(2 * np.pi * freq * t)
        ratio = np.std(bandpass_filter(x)[core]) / np.std(x[core])
        if freq == 5.0:
            assert ratio == pytest.approx(1.0, abs=0.03)
        else:
            assert 20 * np.log10(ratio) <= -20.0

    def test_constant_input_is_removed(self) -> None:
        y = bandpass_filter(np.full(SEGMENT_LENGTH, 5.0))
        assert np.max(np.abs(y)) < 5e-3

    def test_bandpass_is_linear(self) -> None:
        rng = np.random.default_rng(4)
        x, y = rng.standard_normal((2, SEGMENT_LENGTH))
        a, b = 2.5, -0.7
        combined = bandpass_filter(a * x + b * y)
        assert np.max(np.abs(combined - (a * bandpass_filter(x) + b * bandpass_filter(y)))) < 1e-10

    def test_bandpass_segment_keeps_provenance(self) -> None:
        seg = stack_and_crop(_beat(), offset=4, subject_id=9)
        out = bandpass(seg)
        assert (out.subject_id, out.crop_offset) == (9, 4)

    def test_snr_of_known_noise(self) -> None:
        rng = np.random.default_rng(0)
        clean = np.sin(np.linspace(0, 40 * np.pi, 10_000))
        noise = rng.standard_normal(10_000) * np.sqrt(0.5 / 10.0)
        assert snr(clean, clean + noise) == pytest.approx(10.0, abs=0.2)

    def test_snr_without_noise_saturates(self) -> None:
        x = np.sin(np.linspace(0, 10, 100))
        assert snr(x, x) == SNR_SATURATION_DB

    def test_snr_of_constant_signal(self) -> None:
        with pytest.raises(DegenerateSignalError):
            snr(np.ones(10), np.ones(10) + 0.1 * np.arange(10))
