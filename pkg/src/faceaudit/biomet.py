"""Score-distribution statistics and verification operating points.

Acceptance convention throughout: a comparison is accepted as a match when
``score >= threshold``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import AuditError

DUPLICATE_EPS = 1e-6
DUPLICATE_FLAG_FRACTION = 0.001
FMR100_TARGET = 1 / 100
FMR1000_TARGET = 1 / 1000


@dataclass(frozen=True)
class ScoreStats:
    n: int
    mean: float
    std: float
    min: float
    max: float


@dataclass(frozen=True, eq=False)
class DetCurve:
    """FMR/FNMR at every distinct observed score plus one sentinel above the max."""

    thresholds: np.ndarray
    fmr: np.ndarray
    fnmr: np.ndarray
    n_genuine: int
    n_impostor: int


@dataclass(frozen=True)
class OperatingPoints:
    eer: float
    eer_threshold: float
    fmr100: float
    fmr100_threshold: float
    fmr100_saturated: bool
    fmr1000: float
    fmr1000_threshold: float
    fmr1000_saturated: bool


@dataclass(frozen=True, eq=False)
class Histogram:
    bin_edges: np.ndarray
    counts: np.ndarray
    n_total: int

    @property
    def bins(self) -> int:
        return len(self.counts)

    def density(self) -> np.ndarray:
        """Counts scaled so the bars' total area is 1 (zeros when empty)."""
        if self.n_total == 0:
            return np.zeros(len(self.counts))
        return self.counts / (self.n_total * np.diff(self.bin_edges))


@dataclass(frozen=True)
class DuplicateSpike:
    fraction: float
    flagged: bool
    n_duplicates: int
    n_total: int


def _as_scores(scores, what: str = "scores") -> np.ndarray:
    arr = np.asarray(scores, dtype=np.float64).ravel()
    if arr.size == 0:
        raise AuditError("empty-input", f"{what} must be non-empty")
    if not np.isfinite(arr).all():
        raise AuditError("non-finite", f"{what} contain NaN or infinity")
    return arr


def score_stats(scores) -> ScoreStats:
    """Mean and sample (n-1) standard deviation with exact-rounded sums."""
    arr = _as_scores(scores)
    n = arr.size
    mean = math.fsum(arr.tolist()) / n
    if n == 1:
        std = 0.0
    else:
        dev = arr - mean
        std = math.sqrt(math.fsum((dev * dev).tolist()) / (n - 1))
    lo, hi = float(arr.min()), float(arr.max())
    # fsum's correctly rounded mean can only leave [lo, hi] by rounding slack.
    mean = min(max(mean, lo), hi)
    return ScoreStats(n=n, mean=mean, std=std, min=lo, max=hi)


def det_sweep(genuine, impostor) -> DetCurve:
    gen = np.sort(_as_scores(genuine, "genuine scores"))
    imp = np.sort(_as_scores(impostor, "impostor scores"))
    values = np.unique(np.concatenate([gen, imp]))
    thresholds = np.append(values, np.nextafter(values[-1], np.inf))
    # FMR(t) = #{imp >= t}/n_imp ; FNMR(t) = #{gen < t}/n_gen
    fm = imp.size - np.searchsorted(imp, thresholds, side="left")
    fnm = np.searchsorted(gen, thresholds, side="left")
    return DetCurve(
        thresholds=thresholds,
        fmr=fm / imp.size,
        fnmr=fnm / gen.size,
        n_genuine=int(gen.size),
        n_impostor=int(imp.size),
    )


def _fnmr_at_fmr(curve: DetCurve, target: float):
    # Smallest threshold whose FMR meets the target; the sentinel always does.
    i = int(np.argmax(curve.fmr <= target))
    saturated = i == len(curve.thresholds) - 1
    return float(curve.fnmr[i]), float(curve.thresholds[i]), saturated


def operating_points(curve: DetCurve) -> OperatingPoints:
    fmr, fnmr, thr = curve.fmr, curve.fnmr, curve.thresholds
    diff = fmr - fnmr  # non-increasing, from +1 down to -1
    i = int(np.argmax(diff <= 0))
    if diff[i] == 0 or i == 0:
        eer, eer_thr = float(fmr[i]), float(thr[i])
    else:
        # Linear interpolation between the bracketing thresholds i-1 and i.
        alpha = diff[i - 1] / (diff[i - 1] - diff[i])
        eer = float(fmr[i - 1] + alpha * (fmr[i] - fmr[i - 1]))
        eer_thr = float(thr[i - 1] + alpha * (thr[i] - thr[i - 1]))
    f100, t100, s100 = _fnmr_at_fmr(curve, FMR100_TARGET)
    f1000, t1000, s1000 = _fnmr_at_fmr(curve, FMR1000_TARGET)
    return OperatingPoints(
        eer=eer,
        eer_threshold=eer_thr,
        fmr100=f100,
        fmr100_threshold=t100,
        fmr100_saturated=s100,
        fmr1000=f1000,
        fmr1000_threshold=t1000,
        fmr1000_saturated=s1000,
    )


def fdr(genuine: ScoreStats, impostor: ScoreStats) -> float:
    """Fisher discriminant ratio (mu_g - mu_i)^2 / (sigma_g^2 + sigma_i^2)."""
    denom = genuine.std**2 + impostor.std**2
    if denom <= 0:
        raise AuditError("degenerate-variances", "both score distributions have zero variance")
    return (genuine.mean - impostor.mean) ** 2 / denom


def histogram(scores, bins: int = 100, range: tuple[float, float] = (-1.0, 1.0)) -> Histogram:
    """Equal-width histogram; bins are [lo, hi) except the last, which is closed.

    Scores outside the range are clamped into the boundary bins.
    """
    lo, hi = float(range[0]), float(range[1])
    if bins < 1:
        raise AuditError("bad-bins", f"bins must be >= 1, got {bins}")
    if not lo < hi:
        raise AuditError("bad-range", f"histogram range must satisfy lo < hi, got {range}")
    arr = np.asarray(scores, dtype=np.float64).ravel()
    if arr.size and not np.isfinite(arr).all():
        raise AuditError("non-finite", "histogram input contains NaN or infinity")
    edges = np.linspace(lo, hi, bins + 1)
    idx = np.clip(np.searchsorted(edges, arr, side="right") - 1, 0, bins - 1)
    counts = np.bincount(idx, minlength=bins).astype(np.int64)
    return Histogram(bin_edges=edges, counts=counts, n_total=int(arr.size))


def duplicate_spike(mated_scores, eps: float = DUPLICATE_EPS) -> DuplicateSpike:
    """Share of mated scores at (numerically) 1: verbatim repeats under one identity."""
    arr = _as_scores(mated_scores, "mated scores")
    dup = int(np.count_nonzero(arr >= 1.0 - eps))
    fraction = dup / arr.size
    return DuplicateSpike(
        fraction=fraction,
        flagged=fraction > DUPLICATE_FLAG_FRACTION,
        n_duplicates=dup,
        n_total=int(arr.size),
    )
