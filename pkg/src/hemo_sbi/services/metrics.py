"""Posterior auditing: point errors, credible-region size, calibration."""

from __future__ import annotations

import math
from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import numpy.typing as npt
from scipy import integrate, stats

from hemo_sbi.core.exceptions import DomainError
from hemo_sbi.schemas.metrics import SCI_CELLS, StdGatingPoint

FloatArray = npt.NDArray[np.float64]
# (observation, n) -> n scalar posterior draws
Sampler = Callable[[Any, int], npt.ArrayLike]

ACAUC_GRID = 100
_TIE_SCALE = 1e-12


# ---------------------------------------------------------------------------
# Credible-region size
# ---------------------------------------------------------------------------


@dataclass
class CredibleRegionGrid:
    """Histogram of posterior draws on ``cells`` equal cells over ``[low, high]``.

    Draws outside the range are counted in the edge cells so the counts
    always sum to the number of draws.
    """

    low: float
    high: float
    cells: int = SCI_CELLS
    counts: npt.NDArray[np.int64] = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    def __post_init__(self) -> None:
        if not self.high > self.low:
            raise DomainError(f"Grid range [{self.low}, {self.high}] is empty")
        if self.cells < 1:
            raise DomainError("Grid needs at least one cell")
        if self.counts.size == 0:
            self.counts = np.zeros(self.cells, dtype=np.int64)

    @property
    def width(self) -> float:
        return (self.high - self.low) / self.cells

    def add(self, samples: npt.ArrayLike) -> CredibleRegionGrid:
        s = np.clip(np.asarray(samples, dtype=float).ravel(), self.low, self.high)
        idx = np.minimum(((s - self.low) / self.width).astype(np.int64), self.cells - 1)
        self.counts = self.counts + np.bincount(idx, minlength=self.cells)
        return self

    def region_cells(self, alpha: float) -> int:
        """Fewest cells, taken by decreasing count, holding mass >= *alpha*."""
        if not 0 < alpha <= 1:
            raise DomainError(f"Credibility level must be in (0, 1], got {alpha}")
        total = int(self.counts.sum())
        if total == 0:
            raise DomainError("Grid holds no samples")
        cum = np.cumsum(np.sort(self.counts)[::-1])
        need = math.ceil(alpha * total - 1e-9)
        return int(np.searchsorted(cum, need)) + 1


def region_cells(samples: npt.ArrayLike, alpha: float, low: float, high: float, cells: int = SCI_CELLS) -> int:
    """Credible-region size in cells for one set of draws."""
    return CredibleRegionGrid(low, high, cells).add(samples).region_cells(alpha)


def sci(
    sampler: Sampler,
    observations: Iterable[Any],
    alpha: float,
    n_samples: int,
    value_range: tuple[float, float],
    cells: int = SCI_CELLS,
) -> float:
    """Average credible-region size over *observations*, in physical units.

    Parameters
    ----------
    sampler:
        ``sampler(obs, n)`` returns *n* scalar posterior draws.
    value_range:
        ``(low, high)`` of the discretization grid.
    """
    if n_samples < 1000:
        raise DomainError("SCI needs at least 1000 posterior samples per observation")
    low, high = value_range
    sizes = [region_cells(sampler(obs, n_samples), alpha, low, high, cells) for obs in observations]
    if not sizes:
        raise DomainError("SCI needs at least one observation")
    return float(np.mean(sizes)) * (high - low) / cells


# ---------------------------------------------------------------------------
# Calibration
# ---------------------------------------------------------------------------


def credibility_level(
    samples: npt.ArrayLike, truth: float, rng: np.random.Generator | None = None
) -> float:
    """Rank of *truth* among *samples* divided by the sample count.

    Ties are broken by a random perturbation of relative size 1e-12.
    """
    s = np.asarray(samples, dtype=float).ravel()
    if s.size == 0:
        raise DomainError("No posterior samples")
    t = float(truth)
    if np.any(s == t):
        gen = rng or np.random.default_rng(0)
        t += float(gen.uniform(-1.0, 1.0)) * _TIE_SCALE * max(1.0, abs(t))
    return float(np.count_nonzero(s < t)) / s.size


def calibration_levels(
    sampler: Sampler,
    pairs: Iterable[tuple[float, Any]],
    n_samples: int,
    seed: int = 0,
) -> list[float]:
    """Minimum credibility level of every ``(truth, observation)`` pair."""
    rng = np.random.default_rng(seed)
    return [credibility_level(sampler(obs, n_samples), truth, rng) for truth, obs in pairs]


def acauc(levels: Sequence[float] | npt.ArrayLike, k: int = ACAUC_GRID) -> float:
    """Integrated ``|alpha - ECDF(alpha)|`` over ``[0, 1]`` (trapezoid, ``k`` steps)."""
    lv = np.sort(np.asarray(levels, dtype=float).ravel())
    if lv.size == 0:
        raise DomainError("ACAUC needs at least one credibility level")
    grid = np.linspace(0.0, 1.0, k + 1)
    ecdf = np.searchsorted(lv, grid, side="right") / lv.size
    value = float(integrate.trapezoid(np.abs(grid - ecdf), grid))
    return min(0.5, max(0.0, value))


# ---------------------------------------------------------------------------
# Information bound
# ---------------------------------------------------------------------------


def _xlog2(x: float, y: float) -> float:
    """``x * log2(x / y)`` with ``0 log 0 = 0``."""
    return 0.0 if x == 0 else x * math.log2(x / y)


def mi_bound(alpha: float, s: float, n: float) -> float:
    """Bits of information implied by a credible region of *s* of *n* cells at level *alpha*."""
    if not 0 <= alpha <= 1:
        raise DomainError(f"alpha must be in [0, 1], got {alpha}")
    if not 1 <= s <= n:
        raise DomainError(f"Need 1 <= S <= N, got S={s}, N={n}")
    if s == n and alpha < 1:
        raise DomainError("A region covering every cell must have alpha = 1")
    return -_xlog2(alpha, s) - _xlog2(1.0 - alpha, n - s)


def binary_entropy(alpha: float) -> float:
    return -_xlog2(alpha, 1.0) - _xlog2(1.0 - alpha, 1.0)


# ---------------------------------------------------------------------------
# Point estimates
# ---------------------------------------------------------------------------


def point_errors_from_means(means: npt.ArrayLike, truths: npt.ArrayLike) -> tuple[FloatArray, FloatArray]:
    """Per-column MAE and RAE of posterior means against ground truth."""
    m = np.atleast_2d(np.asarray(means, dtype=float).T).T
    t = np.atleast_2d(np.asarray(truths, dtype=float).T).T
    if m.shape != t.shape or m.shape[0] == 0:
        raise DomainError("Means and truths must be equal-shaped and non-empty")
    err = np.abs(m - t)
    return err.mean(axis=0), (err / np.abs(t)).mean(axis=0)


def point_errors(
    sampler: Callable[[Any, int], npt.ArrayLike],
    pairs: Sequence[tuple[npt.ArrayLike, Any]],
    n_samples: int = 1000,
) -> tuple[FloatArray, FloatArray]:
    """MAE and RAE using the Monte-Carlo posterior mean as point estimate."""
    if not pairs:
        raise DomainError("Point errors need at least one pair")
    means = [np.asarray(sampler(obs, n_samples), dtype=float).mean(axis=0) for _, obs in pairs]
    truths = [np.asarray(t, dtype=float) for t, _ in pairs]
    return point_errors_from_means(np.array(means), np.array(truths))


def spearman_per_patient(
    predictions: Mapping[Any, Sequence[float]], truths: Mapping[Any, Sequence[float]]
) -> dict[Any, float]:
    """Rank correlation per patient (average ranks for ties)."""
    out: dict[Any, float] = {}
    for pid, pred in predictions.items():
        truth = truths[pid]
        if len(pred) != len(truth):
            raise DomainError(f"Patient {pid}: {len(pred)} predictions for {len(truth)} truths")
        if len(pred) < 3:
            raise DomainError(f"Patient {pid} needs at least 3 time points")
        rho = stats.spearmanr(np.asarray(truth, dtype=float), np.asarray(pred, dtype=float)).statistic
        out[pid] = float(rho)
    return out


# ---------------------------------------------------------------------------
# Breakdowns
# ---------------------------------------------------------------------------


def snr_bins(snr_db: npt.ArrayLike, edges: Sequence[float]) -> list[npt.NDArray[np.int64]]:
    """Row indices falling in ``[edges[i], edges[i+1])``, last bin closed."""
    s = np.asarray(snr_db, dtype=float)
    e = list(edges)
    if len(e) < 2 or any(b <= a for a, b in zip(e, e[1:])):
        raise DomainError("SNR bin edges must be strictly increasing with at least two values")
    out = []
    for i, (lo, hi) in enumerate(zip(e, e[1:])):
        upper = s <= hi if i == len(e) - 2 else s < hi
        out.append(np.flatnonzero((s >= lo) & upper))
    return out


def std_thresholded_mae(
    means: npt.ArrayLike,
    stds: npt.ArrayLike,
    truths: npt.ArrayLike,
    fractions: Sequence[float] = (1.0, 0.8, 0.6, 0.4, 0.2),
) -> list[StdGatingPoint]:
    """MAE over the predictions with the smallest posterior std.

    For each fraction ``f`` the ``ceil(f * n)`` most certain predictions
    are kept; the threshold is the largest kept std.
    """
    m = np.asarray(means, dtype=float)
    sd = np.asarray(stds, dtype=float)
    t = np.asarray(truths, dtype=float)
    order = np.argsort(sd, kind="stable")
    points = []
    for f in fractions:
        if not 0 < f <= 1:
            raise DomainError(f"Kept fraction must be in (0, 1], got {f}")
        k = max(1, math.ceil(f * m.size)) if m.size else 0
        kept = order[:k]
        points.append(
            StdGatingPoint(
                kept_fraction=f,
                threshold=float(sd[kept].max()) if k else math.nan,
                count=int(k),
                mae=float(np.abs(m[kept] - t[kept]).mean()) if k else None,
            )
        )
    return points
