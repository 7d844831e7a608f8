"""Tests for credible-region size, calibration and point-error metrics."""

from __future__ import annotations

import math
from collections.abc import Callable

import numpy as np
import pytest
from scipy import stats

from hemo_sbi.core.exceptions import DomainError
from hemo_sbi.services.metrics import (
    CredibleRegionGrid,
    acauc,
    binary_entropy,
    calibration_levels,
    credibility_level,
    mi_bound,
    point_errors,
    point_errors_from_means,
    region_cells,
    sci,
    snr_bins,
    spearman_per_patient,
    std_thresholded_mae,
)


def _normal_sampler(scale: float = 1.0, seed: int = 0) -> Callable[[float, int], np.ndarray]:
    rng = np.random.default_rng(seed)

    def draw(mean: float, n: int) -> np.ndarray:
        return rng.normal(mean, scale, n)

    return draw


class TestCredibleRegion:
    """Histogram grid and region size."""

    def test_counts_sum_to_draws(self) -> None:
        grid = CredibleRegionGrid(0.0, 1.0).add(np.array([-5.0, 0.0, 0.5, 1.0, 7.0]))
        assert grid.counts.sum() == 5
        assert grid.counts[0] == 2 and grid.counts[-1] == 2

    def test_point_mass(self) -> None:
        assert region_cells(np.full(1000, 0.37), 0.95, 0.0, 1.0) == 1
        assert region_cells(np.full(1000, 0.37), 0.5, 0.0, 1.0) == 1

    def test_exactly_uniform(self) -> None:
        samples = (np.arange(100_000) + 0.5) / 100_000
        assert region_cells(samples, 0.95, 0.0, 1.0) == 95
        assert region_cells(samples, 1.0, 0.0, 1.0) == 100

    def test_random_uniform(self) -> None:
        samples = np.random.default_rng(0).uniform(0.0, 1.0, 100_000)
        assert region_cells(samples, 0.95, 0.0, 1.0) == 95

    def test_standard_normal(self) -> None:
        samples = np.random.default_rng(1).standard_normal(200_000)
        assert 38 <= region_cells(samples, 0.95, -5.0, 5.0) <= 41

    def test_monotone_in_level(self) -> None:
        samples = np.random.default_rng(2).standard_normal(10_000)
        sizes = [region_cells(samples, a, -5.0, 5.0) for a in (0.2, 0.5, 0.68, 0.95, 0.99)]
        assert sizes == sorted(sizes)

    def test_invalid_inputs(self) -> None:
        with pytest.raises(DomainError):
            CredibleRegionGrid(1.0, 1.0)
        with pytest.raises(DomainError):
            CredibleRegionGrid(0.0, 1.0).region_cells(0.5)
        with pytest.raises(DomainError):
            region_cells([0.5], 0.0, 0.0, 1.0)

    def test_sci_in_physical_units(self) -> None:
        sampler = _normal_sampler()
        value = sci(sampler, [0.0, 0.0, 0.0], 0.95, 20_000, (-5.0, 5.0))
        assert value == pytest.approx(3.92, abs=0.15)

    def test_sci_needs_enough_samples(self) -> None:
        with pytest.raises(DomainError):
            sci(_normal_sampler(), [0.0], 0.95, 999, (-5.0, 5.0))


class TestCalibration:
    """Rank-based credibility levels and ACAUC."""

    def test_extreme_ranks(self) -> None:
        samples = np.linspace(1.0, 2.0, 50)
        assert credibility_level(samples, 0.0) == 0.0
        assert credibility_level(samples, 3.0) == 1.0
        assert credibility_level(samples, 1.5) == pytest.approx(25 / 50)

    def test_tie_is_broken(self) -> None:
        level = credibility_level(np.array([1.0, 2.0, 3.0]), 2.0)
        assert level in (1 / 3, 2 / 3)

    def test_calibrated_sampler_gives_uniform_levels(self) -> None:
        rng = np.random.default_rng(5)
        means = rng.normal(0.0, 3.0, 10_000)
        truths = means + rng.standard_normal(10_000)
        levels = calibration_levels(_normal_sampler(seed=6), list(zip(truths, means)), 200)
        assert len(levels) == 10_000
        # Spread the 201 discrete ranks uniformly within their bins
        jittered = (np.round(np.asarray(levels) * 200) + rng.uniform(size=10_000)) / 201
        assert stats.kstest(jittered, "uniform").pvalue > 0.01
        assert acauc(levels) < 0.02

    def test_overconfident_sampler(self) -> None:
        rng = np.random.default_rng(7)
        truths = rng.standard_normal(500)
        levels = calibration_levels(_normal_sampler(scale=0.01), [(t, 0.0) for t in truths], 500)
        assert acauc(levels) > 0.2

    def test_acauc_closed_forms(self) -> None:
        assert acauc(np.zeros(10)) == pytest.approx(0.5)
        assert acauc(np.full(10, 0.5)) == pytest.approx(0.25)
        uniform = np.arange(1, 1001) / 1000
        assert acauc(uniform) <= 1 / 1000 + 1e-12

    def test_acauc_bounds(self) -> None:
        levels = np.random.default_rng(0).uniform(0.0, 1.0, 50)
        assert 0.0 <= acauc(levels) <= 0.5
        with pytest.raises(DomainError):
            acauc([])


class TestInformationBound:
    """Bits implied by a credible region."""

    def test_half_mass_on_half_cells(self) -> None:
        assert mi_bound(0.5, 50, 100) == pytest.approx(math.log2(100))

    def test_direct_evaluation(self) -> None:
        assert mi_bound(0.9, 10, 100) == pytest.approx(4.108, abs=1e-3)

    def test_full_region(self) -> None:
        assert mi_bound(1.0, 100, 100) == pytest.approx(-math.log2(1 / 100))
        with pytest.raises(DomainError):
            mi_bound(0.9, 100, 100)

    def test_at_least_binary_entropy(self) -> None:
        for alpha in (0.1, 0.5, 0.68, 0.95):
            for s in (1, 5, 50, 99):
                assert mi_bound(alpha, s, 100) >= binary_entropy(alpha) - 1e-12

    def test_monotone_in_region_size(self) -> None:
        bits = [mi_bound(0.95, s, 100) for s in range(1, 90)]
        assert all(b2 > b1 for b1, b2 in zip(bits, bits[1:]))

    def test_domain(self) -> None:
        with pytest.raises(DomainError):
            mi_bound(1.5, 10, 100)
        with pytest.raises(DomainError):
            mi_bound(0.5, 0, 100)


class TestPointErrors:
    """MAE, RAE and rank correlation."""

    def test_point_mass_posterior(self) -> None:
        def exact(obs: np.ndarray, n: int) -> np.ndarray:
            return np.tile(obs, (n, 1))

        truths = [np.array([70.0, 5.0]), np.array([60.0, 4.0])]
        mae, rae = point_errors(exact, [(t, t) for t in truths], n_samples=10)
        assert np.all(mae == 0.0) and np.all(rae == 0.0)

    def test_relative_error(self) -> None:
        truths = np.array([[1.0, 10.0], [2.0, 20.0], [4.0, 40.0]])
        mae, rae = point_errors_from_means(1.3 * truths, truths)
        assert rae == pytest.approx([0.3, 0.3])
        assert mae == pytest.approx([0.3 * 7 / 3, 3.0 * 7 / 3])

    def test_gaussian_posterior_mean_error(self) -> None:
        rng = np.random.default_rng(3)
        truths = rng.uniform(1.0, 2.0, 4000)
        # One posterior draw per pair: the point estimate is N(truth, 1)
        mae, _ = point_errors(_normal_sampler(seed=4), [(t, t) for t in truths], n_samples=1)
        assert mae[0] == pytest.approx(math.sqrt(2.0 / math.pi), rel=0.05)

    def test_empty(self) -> None:
        with pytest.raises(DomainError):
            point_errors(_normal_sampler(), [])

    def test_spearman(self) -> None:
        rho = spearman_per_patient(
            {"a": [1, 3, 2, 4], "b": [1, 2, 3, 4], "c": [4, 3, 2, 1]},
            {"a": [1, 2, 3, 4], "b": [1, 2, 3, 4], "c": [1, 2, 3, 4]},
        )
        assert rho["a"] == pytest.approx(0.8)
        assert rho["b"] == pytest.approx(1.0)
        assert rho["c"] == pytest.approx(-1.0)

    def test_spearman_needs_three_points(self) -> None:
        with pytest.raises(DomainError):
            spearman_per_patient({"a": [1, 2]}, {"a": [1, 2]})


class TestBreakdowns:
    """SNR bins and std gating."""

    def test_snr_bins(self) -> None:
        bins = snr_bins([-5.0, 0.0, 5.0, 10.0, 100.0], [-10.0, 0.0, 10.0, 100.0])
        assert [b.tolist() for b in bins] == [[0], [1, 2], [3, 4]]
        with pytest.raises(DomainError):
            snr_bins([1.0], [0.0, 0.0])

    def test_std_gating(self) -> None:
        means = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
        truths = np.zeros(5)
        stds = np.array([0.5, 0.1, 0.4, 0.2, 0.3])
        points = std_thresholded_mae(means, stds, truths, fractions=(1.0, 0.4))
        assert points[0].count == 5 and points[0].mae == pytest.approx(3.0)
        assert points[1].count == 2
        assert points[1].threshold == pytest.approx(0.2)
        assert points[1].mae == pytest.approx(3.0)
