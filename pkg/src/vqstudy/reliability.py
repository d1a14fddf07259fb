"""MOS reliability analysis: pairwise rank-sum testing and CI summaries.

Discriminability is the fraction of video pairs whose rescaled score
samples differ significantly under a two-sided two-sample rank-sum test
(midranks for ties, exact permutation null for small pooled sizes,
tie-corrected normal approximation otherwise). The mean confidence
interval summarizes per-video MOS uncertainty. Subject-subsampling
curves track both as the panel grows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations

import numpy as np
from scipy.stats import rankdata

from .ratings import MOSTable, RatingMatrix, RescaledScores, compute_mos, confidence_z, subject_stats, zscore_rescale

__all__ = [
    "TestResult",
    "ReliabilityCurvePoint",
    "EXACT_THRESHOLD",
    "wilcoxon_ranksum",
    "discriminability",
    "mean_ci",
    "subsample_curve",
]

# Largest pooled sample size for which the exact permutation null is used
# by default; beyond it the normal approximation is standard practice.
EXACT_THRESHOLD = 12

_SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class TestResult:
    """Outcome of a two-sided two-sample rank-sum test."""

    statistic: float
    p_value: float
    method: str
    significant: bool
    alpha: float


@dataclass(frozen=True)
class ReliabilityCurvePoint:
    """Average reliability metrics over subject resamples of size k."""

    k: int
    discriminability: float
    mean_ci: float
    trials: int


@lru_cache(maxsize=4096)
def _exact_counts(doubled: tuple[int, ...], n1: int) -> tuple[np.ndarray, int]:
    """Subset-sum counts over all size-n1 subsets of doubled midranks.

    Returns (counts, total) where counts[s] is the number of subsets
    whose doubled rank-sum equals s and total = C(N, n1). Doubled ranks
    keep everything in exact integer arithmetic.
    """
    max_sum = sum(doubled)
    counts = np.zeros((n1 + 1, max_sum + 1), dtype=np.int64)
    counts[0, 0] = 1
    for v in doubled:
        for k in range(n1, 0, -1):
            counts[k, v:] += counts[k - 1, : max_sum + 1 - v]
    total = math.comb(len(doubled), n1)
    return counts[n1].copy(), total


def _exact_p(ranks: np.ndarray, n1: int) -> tuple[float, float]:
    """Exact two-sided p: fraction of assignments at least as far from the
    null mean rank-sum as the observed one."""
    doubled = np.rint(2.0 * ranks).astype(np.int64)
    n = doubled.size
    w2 = int(doubled[:n1].sum())
    mean2 = n1 * (n + 1)
    counts, total = _exact_counts(tuple(sorted(int(v) for v in doubled)), n1)
    sums = np.arange(counts.size, dtype=np.int64)
    extreme = int(counts[np.abs(sums - mean2) >= abs(w2 - mean2)].sum())
    return w2 / 2.0, extreme / total


def _normal_p(ranks: np.ndarray, n1: int) -> tuple[float, float]:
    """Normal-approximation two-sided p with tie-corrected variance and
    a 0.5 continuity correction toward the mean."""
    n = ranks.size
    n2 = n - n1
    w = float(ranks[:n1].sum())
    mean = n1 * (n + 1) / 2.0
    _, tie_counts = np.unique(ranks, return_counts=True)
    tie_term = float((tie_counts.astype(np.float64) ** 3 - tie_counts).sum())
    var = n1 * n2 / 12.0 * ((n + 1) - tie_term / (n * (n - 1)))
    if var <= 0.0:
        return w, 1.0
    z = max(0.0, abs(w - mean) - 0.5) / math.sqrt(var)
    return w, math.erfc(z / _SQRT2)


def _as_sample(x, label: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float).ravel()
    if arr.size == 0:
        raise ValueError(f"{label} sample is empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{label} sample contains non-finite values")
    return arr


def wilcoxon_ranksum(a, b, alpha: float = 0.05, method: str = "auto") -> TestResult:
    """Two-sided two-sample rank-sum test on samples ``a`` and ``b``.

    The statistic is the midrank sum of ``a`` within the pooled sample.
    With ``method="auto"`` the exact permutation null is enumerated when
    the pooled size is at most EXACT_THRESHOLD, otherwise the
    tie-corrected normal approximation is used; "exact" and "normal"
    force one route.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    if method not in ("auto", "exact", "normal"):
        raise ValueError(f"unknown method {method!r}")
    a = _as_sample(a, "first")
    b = _as_sample(b, "second")
    n1 = a.size
    ranks = rankdata(np.concatenate([a, b]))
    exact = method == "exact" or (method == "auto" and ranks.size <= EXACT_THRESHOLD)
    if exact:
        w, p = _exact_p(ranks, n1)
        tag = "exact"
    else:
        w, p = _normal_p(ranks, n1)
        tag = "normal-approximation"
    return TestResult(w, p, tag, bool(p < alpha), alpha)


def _pair_pvalues_batch(samples: np.ndarray, pairs, method: str) -> list[float]:
    """Rank all pairs in one call, then score each row with the same
    per-pair code path the scalar test uses."""
    n = samples.shape[1]
    li = np.fromiter((i for i, _ in pairs), dtype=np.intp)
    rj = np.fromiter((j for _, j in pairs), dtype=np.intp)
    pooled = np.concatenate([samples[li], samples[rj]], axis=1)
    ranks = rankdata(pooled, axis=1)
    score = _exact_p if method == "exact" else _normal_p
    return [score(ranks[r], n)[1] for r in range(ranks.shape[0])]


def discriminability(samples, alpha: float = 0.05, method: str = "auto") -> float:
    """Fraction of unordered video pairs with significantly different
    score samples (no multiple-comparison correction).

    ``samples`` is one 1-D array of rescaled scores per video.
    """
    samples = [_as_sample(s, f"video {i}") for i, s in enumerate(samples)]
    if len(samples) < 2:
        raise ValueError("discriminability needs at least 2 videos")
    pairs = list(combinations(range(len(samples)), 2))
    sizes = {s.size for s in samples}
    if len(sizes) == 1:
        n = sizes.pop()
        resolved = method if method != "auto" else ("exact" if 2 * n <= EXACT_THRESHOLD else "normal")
        if resolved == "normal" and len(pairs) > 1:
            pvals = _pair_pvalues_batch(np.vstack(samples), pairs, resolved)
            significant = sum(p < alpha for p in pvals)
            return significant / len(pairs)
    significant = sum(wilcoxon_ranksum(samples[i], samples[j], alpha, method).significant for i, j in pairs)
    return significant / len(pairs)


def mean_ci(mos: MOSTable, level: float = 0.95, scale_by_sqrt_n: bool = True) -> float:
    """Average per-video confidence half-width z(level) * std / sqrt(n).

    ``scale_by_sqrt_n=False`` drops the sqrt(n) divisor, reporting the
    average z-scaled standard deviation instead.
    """
    for name, n in zip(mos.videos, mos.n):
        if n < 2:
            raise ValueError(f"video {name!r} has n={int(n)} < 2 ratings; CI is undefined")
    z = confidence_z(level)
    widths = z * mos.std / np.sqrt(mos.n) if scale_by_sqrt_n else z * mos.std
    return float(np.mean(widths))


def _trial_mean(values: np.ndarray) -> float:
    # Identical trials (e.g. k == subject count) must average to the
    # common value exactly, which repeated float summation does not give.
    if values.min() == values.max():
        return float(values[0])
    return float(np.mean(values))


def subsample_curve(
    matrix: RatingMatrix,
    k_values,
    trials: int = 100,
    alpha: float = 0.05,
    seed: int = 0,
    level: float = 0.95,
    method: str = "auto",
) -> list[ReliabilityCurvePoint]:
    """Reliability metrics on random subject subsets of increasing size.

    For each k, ``trials`` subject subsets are drawn without replacement
    from a generator seeded with ``seed``; normalization, MOS,
    discriminability and mean CI are recomputed on each subset and
    averaged. Deterministic given (matrix, k_values, trials, seed).

    Per-subject normalization depends only on that subject's own
    ratings, so z'-scores are computed once and subsets select rows.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    k_list = [int(k) for k in k_values]
    n_subjects = len(matrix.subjects)
    for k in k_list:
        if k < 2:
            raise ValueError(f"subset size k={k} is below the minimum of 2")
        if k > n_subjects:
            raise ValueError(f"subset size k={k} exceeds the {n_subjects} available subjects")
    rescaled = zscore_rescale(matrix, subject_stats(matrix))
    rng = np.random.default_rng(seed)
    points = []
    for k in k_list:
        disc = np.empty(trials)
        ci = np.empty(trials)
        for t in range(trials):
            idx = np.sort(rng.choice(n_subjects, size=k, replace=False))
            sub = RescaledScores(
                tuple(matrix.subjects[i] for i in idx),
                matrix.videos,
                rescaled.values[idx],
                rescaled.mask[idx],
            )
            disc[t] = discriminability(sub.video_samples(), alpha, method)
            ci[t] = mean_ci(compute_mos(sub, level), level)
        points.append(ReliabilityCurvePoint(k, _trial_mean(disc), _trial_mean(ci), trials))
    return points
