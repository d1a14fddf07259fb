"""Seeded synthetic studies for demos, calibration checks and tests."""

from __future__ import annotations

import numpy as np

from .ratings import RatingMatrix
from .studyio import StudyManifest, VideoRecord

__all__ = ["make_study", "make_manifest"]


def make_study(
    n_subjects: int = 20,
    n_videos: int = 60,
    seed: int = 0,
    kind: str = "graded",
    scale=(1.0, 10.0),
    noise: float = 0.6,
    bias: float = 0.5,
    integer: bool = False,
) -> RatingMatrix:
    """Generate a full rating matrix with per-subject bias and noise.

    ``kind="graded"`` spreads true video quality across the scale;
    ``kind="null"`` gives every video the same true quality, so any
    measured discriminability is pure false-positive rate.
    """
    if kind not in ("graded", "null"):
        raise ValueError(f"unknown study kind {kind!r}")
    rng = np.random.default_rng((seed, 11))
    lo, hi = scale
    mid = (lo + hi) / 2.0
    span = hi - lo
    if kind == "graded":
        true = np.linspace(lo + 0.15 * span, hi - 0.15 * span, n_videos)
    else:
        true = np.full(n_videos, mid)
    subject_bias = rng.uniform(-bias, bias, size=n_subjects)
    subject_gain = rng.uniform(0.85, 1.15, size=n_subjects)
    raw = (
        mid
        + subject_gain[:, None] * (true[None, :] - mid)
        + subject_bias[:, None]
        + noise * rng.standard_normal((n_subjects, n_videos))
    )
    if integer:
        raw = np.rint(raw)
    raw = np.clip(raw, lo, hi)
    subjects = tuple(f"subj{i:02d}" for i in range(n_subjects))
    videos = tuple(f"vid{j:03d}" for j in range(n_videos))
    return RatingMatrix.full(subjects, videos, raw, (float(lo), float(hi)))


def make_manifest(
    n_sources: int = 200,
    bitrates=("30M", "5M", "1M"),
    n_subjects: int = 20,
    scale=(1.0, 10.0),
) -> StudyManifest:
    """Source-times-bitrate manifest mirroring a compressed-variants study."""
    videos = tuple(
        VideoRecord(f"src{s:03d}_{b}", f"src{s:03d}", b, ("left", "right"))
        for s in range(n_sources)
        for b in bitrates
    )
    subjects = tuple(f"subj{i:02d}" for i in range(n_subjects))
    return StudyManifest(videos, subjects, (float(scale[0]), float(scale[1])), {"kind": "synthetic"})
