"""Raw opinion-score handling: screening, per-subject normalization, MOS.

The pipeline is: collect a :class:`RatingMatrix`, screen subjects for
outlier behaviour (:func:`screen_subjects`), drop rejected subjects,
standardize each remaining subject's ratings (:func:`zscore_rescale`)
and average per video into a :class:`MOSTable` (:func:`compute_mos`).

All operations are pure functions of their inputs; the dataclasses are
frozen and safe to share across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist

import numpy as np

__all__ = [
    "RatingMatrix",
    "SubjectStats",
    "ScreeningPolicy",
    "ScreeningReport",
    "RescaledScores",
    "MOSTable",
    "DegenerateSubjectError",
    "ConstantRaterError",
    "EmptyStudyError",
    "UnratedVideoError",
    "subject_stats",
    "screen_subjects",
    "zscore_rescale",
    "zprime_from_z",
    "compute_mos",
    "confidence_z",
]


class DegenerateSubjectError(ValueError):
    """A subject has too few ratings for per-subject statistics."""


class ConstantRaterError(ValueError):
    """A subject rated every video identically; z-scores are undefined."""


class EmptyStudyError(ValueError):
    """An operation received a matrix with no usable ratings."""


class UnratedVideoError(ValueError):
    """A video has no present ratings after screening."""


def _check_unique(names, kind: str) -> None:
    seen = set()
    for name in names:
        if name in seen:
            raise ValueError(f"duplicate {kind} identifier: {name!r}")
        seen.add(name)


@dataclass(frozen=True)
class RatingMatrix:
    """Dense subject-by-video opinion scores with a presence mask.

    ``scores[i, j]`` is the rating of subject ``subjects[i]`` for video
    ``videos[j]``; it is meaningful only where ``mask[i, j]`` is True.
    Present scores must lie within ``scale`` (inclusive).
    """

    subjects: tuple[str, ...]
    videos: tuple[str, ...]
    scores: np.ndarray
    mask: np.ndarray
    scale: tuple[float, float] = (1.0, 10.0)

    def __post_init__(self):
        object.__setattr__(self, "subjects", tuple(self.subjects))
        object.__setattr__(self, "videos", tuple(self.videos))
        object.__setattr__(self, "scores", np.asarray(self.scores, dtype=float))
        object.__setattr__(self, "mask", np.asarray(self.mask, dtype=bool))
        if not self.subjects or not self.videos:
            raise EmptyStudyError("a rating matrix needs at least one subject and one video")
        _check_unique(self.subjects, "subject")
        _check_unique(self.videos, "video")
        shape = (len(self.subjects), len(self.videos))
        if self.scores.shape != shape or self.mask.shape != shape:
            raise ValueError(
                f"score table shape {self.scores.shape} does not match "
                f"{len(self.subjects)} subjects x {len(self.videos)} videos"
            )
        lo, hi = self.scale
        if not lo < hi:
            raise ValueError(f"invalid scale bounds {self.scale}")
        present = self.scores[self.mask]
        if present.size and (np.any(present < lo) or np.any(present > hi)):
            raise ValueError(f"present scores fall outside the declared scale [{lo}, {hi}]")

    @classmethod
    def full(cls, subjects, videos, scores, scale=(1.0, 10.0)) -> "RatingMatrix":
        """Build a matrix where every (subject, video) rating is present."""
        scores = np.asarray(scores, dtype=float)
        return cls(tuple(subjects), tuple(videos), scores, np.ones(scores.shape, dtype=bool), scale)

    @property
    def n_ratings(self) -> int:
        return int(self.mask.sum())

    def drop_subjects(self, names) -> "RatingMatrix":
        """Return a copy without the named subjects (e.g. screening rejects)."""
        drop = set(names)
        unknown = drop - set(self.subjects)
        if unknown:
            raise KeyError(f"unknown subjects: {sorted(unknown)}")
        keep = [i for i, s in enumerate(self.subjects) if s not in drop]
        if not keep:
            raise EmptyStudyError("dropping these subjects would leave an empty study")
        return RatingMatrix(
            tuple(self.subjects[i] for i in keep),
            self.videos,
            self.scores[keep],
            self.mask[keep],
            self.scale,
        )


@dataclass(frozen=True)
class SubjectStats:
    """Per-subject rating mean and sample standard deviation."""

    subjects: tuple[str, ...]
    mean: np.ndarray
    std: np.ndarray
    count: np.ndarray


@dataclass(frozen=True)
class ScreeningPolicy:
    """Thresholds for the kurtosis-gated outlier screening procedure.

    Deviations strictly beyond ``mean + multiplier * std`` (above) or
    strictly below ``mean - multiplier * std`` count into the P and Q
    tallies; equality never counts, so a subject agreeing exactly with
    the per-video mean is never flagged.
    """

    kurtosis_low: float = 2.0
    kurtosis_high: float = 4.0
    normal_multiplier: float = 2.0
    nonnormal_multiplier: float = math.sqrt(20.0)
    max_outlier_fraction: float = 0.05
    asymmetry_floor: float = 0.3

    def __post_init__(self):
        if not self.kurtosis_low < self.kurtosis_high:
            raise ValueError("kurtosis window must satisfy low < high")
        for name in ("normal_multiplier", "nonnormal_multiplier", "max_outlier_fraction", "asymmetry_floor"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")


@dataclass(frozen=True)
class ScreeningReport:
    """Outcome of subject screening: per-subject tallies and flags."""

    subjects: tuple[str, ...]
    videos: tuple[str, ...]
    p_counts: np.ndarray
    q_counts: np.ndarray
    rejected: np.ndarray
    video_kurtosis: np.ndarray
    policy: ScreeningPolicy

    @property
    def rejected_subjects(self) -> tuple[str, ...]:
        return tuple(s for s, r in zip(self.subjects, self.rejected) if r)


@dataclass(frozen=True)
class RescaledScores:
    """Per-rating standardized scores mapped onto the 0-100 scale.

    ``values`` holds z'-scores where ``mask`` is True and NaN elsewhere.
    """

    subjects: tuple[str, ...]
    videos: tuple[str, ...]
    values: np.ndarray
    mask: np.ndarray

    def video_samples(self) -> list[np.ndarray]:
        """Present z'-scores per video, in video order."""
        return [self.values[self.mask[:, j], j] for j in range(len(self.videos))]


@dataclass(frozen=True)
class MOSTable:
    """Per-video mean opinion scores on the 0-100 scale.

    ``std`` and ``ci`` are NaN for videos with a single rating; ``ci``
    is the two-sided normal confidence half-width at ``level``.
    """

    videos: tuple[str, ...]
    mos: np.ndarray
    std: np.ndarray
    n: np.ndarray
    ci: np.ndarray
    level: float = 0.95


def confidence_z(level: float) -> float:
    """Two-sided standard-normal quantile, e.g. 1.959964 for level 0.95."""
    if not 0.0 < level < 1.0:
        raise ValueError(f"confidence level must be in (0, 1), got {level}")
    return NormalDist().inv_cdf((1.0 + level) / 2.0)


def subject_stats(raw: RatingMatrix) -> SubjectStats:
    """Mean and sample (n-1) standard deviation of each subject's ratings.

    Raises:
        DegenerateSubjectError: if any subject has fewer than 2 ratings.
    """
    counts = raw.mask.sum(axis=1)
    for name, c in zip(raw.subjects, counts):
        if c < 2:
            raise DegenerateSubjectError(
                f"subject {name!r} has {int(c)} rating(s); at least 2 are required"
            )
    filled = np.where(raw.mask, raw.scores, 0.0)
    means = filled.sum(axis=1) / counts
    dev = np.where(raw.mask, raw.scores - means[:, None], 0.0)
    ss = (dev * dev).sum(axis=1)
    std = np.sqrt(ss / (counts - 1))
    return SubjectStats(raw.subjects, means, std, counts.astype(np.int64))


def _video_moments(raw: RatingMatrix):
    """Per-video mean, sample std and population-moment kurtosis.

    Kurtosis is m4/m2^2 with moments in 1/n form; NaN when the spread is
    zero or a video has a single rating.
    """
    counts = raw.mask.sum(axis=0)
    filled = np.where(raw.mask, raw.scores, 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        means = np.where(counts > 0, filled.sum(axis=0) / counts, np.nan)
        dev = np.where(raw.mask, raw.scores - means[None, :], 0.0)
        m2 = (dev**2).sum(axis=0) / counts
        m4 = (dev**4).sum(axis=0) / counts
        std = np.sqrt((dev**2).sum(axis=0) / np.where(counts > 1, counts - 1, np.nan))
        kurt = np.where(m2 > 0, m4 / np.where(m2 > 0, m2, np.nan) ** 2, np.nan)
    return means, std, kurt, counts


def screen_subjects(raw: RatingMatrix, policy: ScreeningPolicy | None = None) -> ScreeningReport:
    """Flag subjects whose ratings deviate often and symmetrically.

    Per video, the score distribution's kurtosis selects the deviation
    multiplier (``normal_multiplier`` inside the normality window, the
    non-normal multiplier outside it or when kurtosis is undefined).
    Ratings strictly beyond mean +/- multiplier*std count into P (above)
    and Q (below). A subject is rejected when (P+Q)/ratings exceeds
    ``max_outlier_fraction`` while |P-Q|/(P+Q) stays below
    ``asymmetry_floor``, i.e. frequent and two-sided deviations.
    """
    policy = policy or ScreeningPolicy()
    if raw.n_ratings == 0:
        raise EmptyStudyError("cannot screen a matrix with no present ratings")
    means, std, kurt, _ = _video_moments(raw)
    in_window = (kurt >= policy.kurtosis_low) & (kurt <= policy.kurtosis_high)
    mult = np.where(in_window, policy.normal_multiplier, policy.nonnormal_multiplier)
    with np.errstate(invalid="ignore"):
        hi = means + mult * std
        lo = means - mult * std
        above = raw.mask & (raw.scores > hi[None, :])
        below = raw.mask & (raw.scores < lo[None, :])
    p_counts = above.sum(axis=1).astype(np.int64)
    q_counts = below.sum(axis=1).astype(np.int64)
    ratings = raw.mask.sum(axis=1)
    total = p_counts + q_counts
    with np.errstate(invalid="ignore", divide="ignore"):
        frac = total / ratings
        asym = np.where(total > 0, np.abs(p_counts - q_counts) / np.where(total > 0, total, 1), np.inf)
    rejected = (frac > policy.max_outlier_fraction) & (asym < policy.asymmetry_floor)
    return ScreeningReport(raw.subjects, raw.videos, p_counts, q_counts, rejected, kurt, policy)


def zprime_from_z(z):
    """Affine map from a z-score to the 0-100 scale, clipped at z = +/-3."""
    return np.clip(100.0 * (np.asarray(z, dtype=float) + 3.0) / 6.0, 0.0, 100.0)


def zscore_rescale(raw: RatingMatrix, stats: SubjectStats | None = None) -> RescaledScores:
    """Standardize each subject's ratings and map them onto 0-100.

    z = (r - mean_i) / std_i per present rating, then z' = 100(z+3)/6
    clipped into [0, 100].

    Raises:
        ConstantRaterError: if any subject has zero rating spread.
    """
    stats = stats if stats is not None else subject_stats(raw)
    if stats.subjects != raw.subjects:
        raise ValueError("subject statistics do not match the rating matrix")
    for name, s in zip(stats.subjects, stats.std):
        if s == 0.0:
            raise ConstantRaterError(
                f"subject {name!r} gave identical ratings everywhere; "
                "z-scores are undefined (exclude the subject and retry)"
            )
    with np.errstate(invalid="ignore"):
        z = (raw.scores - stats.mean[:, None]) / stats.std[:, None]
    values = np.where(raw.mask, zprime_from_z(z), np.nan)
    return RescaledScores(raw.subjects, raw.videos, values, raw.mask.copy())


def compute_mos(rescaled: RescaledScores, level: float = 0.95) -> MOSTable:
    """Average z'-scores per video into MOS, with spread and CI half-width.

    The per-video standard deviation uses the sample (n-1) estimator and
    the CI half-width is confidence_z(level) * std / sqrt(n); both are
    NaN for single-rating videos.

    Raises:
        UnratedVideoError: if any video has no present rating.
    """
    counts = rescaled.mask.sum(axis=0)
    for name, c in zip(rescaled.videos, counts):
        if c == 0:
            raise UnratedVideoError(f"video {name!r} has no ratings")
    filled = np.where(rescaled.mask, rescaled.values, 0.0)
    mos = filled.sum(axis=0) / counts
    dev = np.where(rescaled.mask, rescaled.values - mos[None, :], 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        std = np.sqrt((dev * dev).sum(axis=0) / np.where(counts > 1, counts - 1, np.nan))
        ci = confidence_z(level) * std / np.sqrt(counts)
    return MOSTable(rescaled.videos, mos, std, counts.astype(np.int64), ci, level)
