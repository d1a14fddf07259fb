#!/usr/bin/env python3
"""End-to-end pipeline demo on a synthetic study.

Generates a source-times-bitrate manifest and a full rating matrix
(optionally with a planted unreliable rater), writes the study files,
then drives screening, MOS construction, reliability analysis and the
evaluation of three synthetic predictors of differing quality.

    python3 scripts/run_synthetic_study.py --out /tmp/study --seed 7
"""

from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np

from vqstudy.metrics import PredictionSet, evaluate, fuse_views, make_split
from vqstudy.ratings import RatingMatrix, compute_mos, screen_subjects, subject_stats, zscore_rescale
from vqstudy.reliability import discriminability, mean_ci, subsample_curve
from vqstudy.studyio import save_manifest, write_curve, write_mos, write_predictions, write_ratings
from vqstudy.synthetic import make_manifest, make_study


def plant_unreliable_rater(matrix: RatingMatrix, seed: int, spread: float) -> RatingMatrix:
    """Replace the last subject's ratings with balanced extreme scores.

    The offset sits near three honest-rater standard deviations: far
    enough to deviate, close enough that the per-video kurtosis stays in
    the normality window instead of masking the deviations.
    """
    rng = np.random.default_rng((seed, 99))
    scores = matrix.scores.copy()
    consensus = scores[:-1].mean(axis=0)
    flips = np.where(np.arange(scores.shape[1]) % 2 == 0, 1.0, -1.0)
    scores[-1] = np.clip(consensus + 2.9 * spread * flips + rng.uniform(-0.2, 0.2, scores.shape[1]), 1, 10)
    return RatingMatrix(matrix.subjects, matrix.videos, scores, matrix.mask, matrix.scale)


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("out/synthetic_study"))
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--subjects", type=int, default=20)
    ap.add_argument("--sources", type=int, default=20)
    ap.add_argument("--trials", type=int, default=50)
    ap.add_argument("--plant-outlier", action="store_true")
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    manifest = make_manifest(n_sources=args.sources, n_subjects=args.subjects)
    n_videos = len(manifest.video_ids)
    noise = 0.9 if args.plant_outlier else 0.35
    matrix = make_study(args.subjects, n_videos, seed=args.seed, noise=noise)
    matrix = RatingMatrix(manifest.subjects, manifest.video_ids, matrix.scores, matrix.mask, matrix.scale)
    if args.plant_outlier:
        matrix = plant_unreliable_rater(matrix, args.seed, noise)
    save_manifest(manifest, args.out / "manifest.json")
    write_ratings(matrix, args.out / "ratings.csv")

    report = screen_subjects(matrix)
    print(f"screening: {len(report.rejected_subjects)} of {len(matrix.subjects)} subjects rejected "
          f"{list(report.rejected_subjects)}")
    kept = matrix.drop_subjects(report.rejected_subjects) if report.rejected_subjects else matrix

    rescaled = zscore_rescale(kept, subject_stats(kept))
    table = compute_mos(rescaled)
    write_mos(table, args.out / "mos.csv", {"seed": args.seed})
    print(f"MOS over {len(table.videos)} videos: min={table.mos.min():.2f} "
          f"median={np.median(table.mos):.2f} max={table.mos.max():.2f}")

    disc = discriminability(rescaled.video_samples(), alpha=0.05)
    ci = mean_ci(table)
    print(f"full panel: discriminability={disc:.4f} mean_ci={ci:.3f}")
    panel = len(kept.subjects)
    k_values = sorted({max(2, panel // 4), panel // 2, panel})
    points = subsample_curve(kept, k_values, trials=args.trials, seed=args.seed)
    write_curve(points, args.out / "reliability_curve.csv", {"seed": args.seed})
    for p in points:
        print(f"  k={p.k:3d}  discriminability={p.discriminability:.4f}  mean_ci={p.mean_ci:.3f}")

    rng = np.random.default_rng((args.seed, 1))
    predictors = {
        "faithful": table.mos + rng.normal(0, 3, n_videos),
        "noisy": table.mos + rng.normal(0, 15, n_videos),
        "compressive": (table.mos / 100.0) ** 3,
    }
    train, test = make_split(manifest.video_ids, (4, 1), args.seed, manifest.sources)
    print(f"split: {len(train)} train / {len(test)} test videos (grouped by source)")
    predsets = []
    for name, scores in predictors.items():
        left = PredictionSet(table.videos, scores, "left")
        jitter = 0.05 * float(np.std(scores))
        right = PredictionSet(table.videos, scores + rng.normal(0, jitter, n_videos), "right")
        fused = fuse_views(left, right)
        r = evaluate(fused, table)
        print(f"  {name:12s} SRCC={r.srcc:+.4f}  KRCC={r.krcc:+.4f}  PLCC={r.plcc:+.4f}  RMSE={r.rmse:.4f}")
        predsets.extend([left, right])
    write_predictions(predsets, args.out / "predictions.csv")
    print(f"study files written to {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
