"""Command-line front end tying the pipeline together.

Subcommands: ``mos``, ``screen``, ``reliability``, ``evaluate``,
``split``, ``fusion-demo``. Every run embeds its seed and config digest
in the emitted reports and is byte-identical when rerun with the same
configuration.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import fusion, studyio
from .metrics import evaluate, fuse_views, make_split
from .ratings import MOSTable, ScreeningPolicy, compute_mos, screen_subjects, zscore_rescale
from .reliability import discriminability, mean_ci, subsample_curve
from .studyio import IngestError, RunConfig, config_digest
from .tensorio import read_tensor, write_tensor


def _parse_ratio(text: str) -> tuple[int, int]:
    try:
        train, test = (int(p) for p in text.split(":"))
    except ValueError:
        raise ValueError(f"ratio must look like 4:1, got {text!r}") from None
    return train, test


def _parse_k_values(text: str | None) -> tuple[int, ...] | None:
    if text is None:
        return None
    return tuple(int(p) for p in text.split(","))


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _config(args, command: str) -> RunConfig:
    return RunConfig(
        command=command,
        ratings=getattr(args, "ratings", None),
        predictions=getattr(args, "predictions", None),
        manifest=getattr(args, "manifest", None),
        out=getattr(args, "out", None),
        seed=getattr(args, "seed", 0),
        alpha=getattr(args, "alpha", 0.05),
        level=getattr(args, "level", 0.95),
        ratio=getattr(args, "ratio", (4, 1)),
        group_by_source=getattr(args, "group_by_source", False),
        trials=getattr(args, "trials", 100),
        k_values=getattr(args, "k_values", None),
        policy=ScreeningPolicy(),
    )


def _meta(config: RunConfig) -> dict:
    return {"seed": config.seed, "config_sha256": config_digest(config)}


def _mos_pipeline(config: RunConfig):
    manifest = studyio.load_manifest(config.manifest) if config.manifest else None
    matrix = studyio.read_ratings(config.ratings, manifest)
    report = screen_subjects(matrix, config.policy)
    kept = matrix.drop_subjects(report.rejected_subjects) if report.rejected_subjects else matrix
    rescaled = zscore_rescale(kept)
    return manifest, matrix, report, kept, rescaled, compute_mos(rescaled, config.level)


def cmd_mos(args) -> int:
    config = _config(args, "mos")
    out = _out_dir(args)
    _, _, report, kept, _, mos_table = _mos_pipeline(config)
    studyio.write_mos(mos_table, out / "mos.csv", _meta(config))
    studyio.write_json(
        {
            "config": config.as_dict(),
            "config_sha256": config_digest(config),
            "seed": config.seed,
            "n_ratings": kept.n_ratings,
            "rejected_subjects": list(report.rejected_subjects),
            "videos": list(mos_table.videos),
            "mos": list(map(float, mos_table.mos)),
            "std": list(map(float, mos_table.std)),
            "n": list(map(int, mos_table.n)),
            "ci": list(map(float, mos_table.ci)),
        },
        out / "mos.json",
    )
    return 0


def cmd_screen(args) -> int:
    config = _config(args, "screen")
    out = _out_dir(args)
    manifest = studyio.load_manifest(config.manifest) if config.manifest else None
    matrix = studyio.read_ratings(config.ratings, manifest)
    report = screen_subjects(matrix, config.policy)
    studyio.write_screening(report, out / "screening.csv", _meta(config))
    studyio.write_json(
        {
            "config": config.as_dict(),
            "config_sha256": config_digest(config),
            "seed": config.seed,
            "subjects": list(report.subjects),
            "p_counts": list(map(int, report.p_counts)),
            "q_counts": list(map(int, report.q_counts)),
            "rejected": [bool(r) for r in report.rejected],
            "video_kurtosis": {v: float(k) for v, k in zip(report.videos, report.video_kurtosis)},
        },
        out / "screening.json",
    )
    return 0


def _default_k_values(n_subjects: int) -> tuple[int, ...]:
    num = min(5, max(1, n_subjects - 1))
    return tuple(sorted({int(round(v)) for v in np.linspace(2, n_subjects, num)}))


def cmd_reliability(args) -> int:
    config = _config(args, "reliability")
    out = _out_dir(args)
    _, _, _, kept, rescaled, mos_table = _mos_pipeline(config)
    k_values = config.k_values or _default_k_values(len(kept.subjects))
    if config.k_values is None:
        config = replace(config, k_values=k_values)
    points = subsample_curve(kept, k_values, config.trials, config.alpha, config.seed, config.level)
    full_disc = discriminability(rescaled.video_samples(), config.alpha)
    full_ci = mean_ci(mos_table, config.level)
    studyio.write_curve(points, out / "reliability_curve.csv", _meta(config))
    studyio.write_json(
        {
            "config": config.as_dict(),
            "config_sha256": config_digest(config),
            "seed": config.seed,
            "full_panel": {"discriminability": full_disc, "mean_ci": full_ci, "subjects": len(kept.subjects)},
            "curve": [
                {"k": p.k, "discriminability_mean": p.discriminability, "ci_mean": p.mean_ci, "trials": p.trials}
                for p in points
            ],
        },
        out / "reliability.json",
    )
    return 0


def _subset_mos(mos_table: MOSTable, ids) -> MOSTable:
    wanted = set(ids)
    idx = [j for j, v in enumerate(mos_table.videos) if v in wanted]
    return MOSTable(
        tuple(mos_table.videos[j] for j in idx),
        mos_table.mos[idx],
        mos_table.std[idx],
        mos_table.n[idx],
        mos_table.ci[idx],
        mos_table.level,
    )


def cmd_evaluate(args) -> int:
    config = _config(args, "evaluate")
    out = _out_dir(args)
    manifest, _, _, _, _, mos_table = _mos_pipeline(config)
    preds = studyio.read_predictions(config.predictions, manifest)
    if "fusion" not in preds and "left" in preds and "right" in preds:
        preds["fusion"] = fuse_views(preds["left"], preds["right"])
    reports = []
    for view in ("left", "right", "fusion"):
        if view not in preds:
            continue
        pred = preds[view]
        target = mos_table
        if set(pred.videos) < set(mos_table.videos):
            target = _subset_mos(mos_table, pred.videos)
        reports.append(evaluate(pred, target))
    if not reports:
        raise ValueError("no usable view channel in the predictions file")
    rows = [
        [r.view, r.n, repr(r.srcc), repr(r.krcc), repr(r.plcc), repr(r.rmse), repr(r.rmse_raw)]
        for r in reports
    ]
    studyio.write_table(
        out / "evaluate.csv",
        _meta(config),
        ["view", "n", "srcc", "krcc", "plcc", "rmse", "rmse_raw"],
        rows,
    )
    studyio.write_json(
        {
            "config": config.as_dict(),
            "config_sha256": config_digest(config),
            "seed": config.seed,
            "reports": {r.view: r.as_dict() for r in reports},
        },
        out / "evaluate.json",
    )
    return 0


def cmd_split(args) -> int:
    config = _config(args, "split")
    out = _out_dir(args)
    manifest = studyio.load_manifest(config.manifest)
    groups = manifest.sources if config.group_by_source else None
    train, test = make_split(manifest.video_ids, config.ratio, config.seed, groups)
    studyio.write_table(out / "split_train.csv", _meta(config), ["video_id"], [[v] for v in train])
    studyio.write_table(out / "split_test.csv", _meta(config), ["video_id"], [[v] for v in test])
    studyio.write_json(
        {
            "config": config.as_dict(),
            "config_sha256": config_digest(config),
            "seed": config.seed,
            "counts": {"train": len(train), "test": len(test)},
            "train": list(train),
            "test": list(test),
        },
        out / "split.json",
    )
    return 0


def cmd_fusion_demo(args) -> int:
    config = _config(args, "fusion-demo")
    model = fusion.FusionModel.seeded(config.seed, single_view=args.single_view, n_key_frames=args.key_frames)
    if args.left:
        left = read_tensor(args.left)
    else:
        left = fusion.toy_frames(config.seed, args.frames, args.size, args.size, args.channels)
    if args.single_view:
        right = None
    elif args.right:
        right = read_tensor(args.right)
    else:
        right = fusion.toy_frames(config.seed + 1, args.frames, args.size, args.size, args.channels)
    q_hat = model.forward(left, right)
    print(f"Q_hat={q_hat!r}")
    if args.out:
        out = _out_dir(args)
        studyio.write_json(
            {
                "config": config.as_dict(),
                "config_sha256": config_digest(config),
                "seed": config.seed,
                "single_view": args.single_view,
                "q_hat": q_hat,
            },
            out / "fusion_demo.json",
        )
        write_tensor(out / "spatial_features.bin", model.spatial_features(left).values)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vqstudy", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, ratings=False, predictions=False, manifest=True, out_required=True):
        if ratings:
            p.add_argument("--ratings", required=True, help="ratings CSV (subject_id,video_id,score)")
        if predictions:
            p.add_argument("--predictions", required=True, help="predictions CSV (video_id,view,score)")
        if manifest:
            p.add_argument("--manifest", help="study manifest JSON")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", required=out_required, help="output directory")

    p = sub.add_parser("mos", help="screen, normalize and emit per-video MOS")
    common(p, ratings=True)
    p.add_argument("--level", type=float, default=0.95)
    p.set_defaults(func=cmd_mos)

    p = sub.add_parser("screen", help="subject screening report")
    common(p, ratings=True)
    p.set_defaults(func=cmd_screen)

    p = sub.add_parser("reliability", help="discriminability / mean-CI subsampling curve")
    common(p, ratings=True)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--k-values", dest="k_values", type=_parse_k_values, default=None,
                   help="comma-separated subject-subset sizes")
    p.set_defaults(func=cmd_reliability)

    p = sub.add_parser("evaluate", help="score predictions against the MOS")
    common(p, ratings=True, predictions=True)
    p.add_argument("--level", type=float, default=0.95)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("split", help="deterministic train/test split")
    p.add_argument("--manifest", required=True)
    p.add_argument("--ratio", type=_parse_ratio, default=(4, 1))
    p.add_argument("--group-by-source", dest="group_by_source", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("fusion-demo", help="toy binocular fusion forward pass")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--frames", type=int, default=12)
    p.add_argument("--size", type=int, default=8)
    p.add_argument("--channels", type=int, default=3)
    p.add_argument("--key-frames", dest="key_frames", type=int, default=4)
    p.add_argument("--single-view", dest="single_view", action="store_true")
    p.add_argument("--left", help="optional rank-4 tensor file for the left view")
    p.add_argument("--right", help="optional rank-4 tensor file for the right view")
    p.add_argument("--out", help="optional output directory")
    p.set_defaults(func=cmd_fusion_demo)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, KeyError) as exc:
        doc = {"error": type(exc).__name__, "message": str(exc)}
        if isinstance(exc, IngestError):
            doc["problems"] = list(exc.problems)
        print(json.dumps(doc, sort_keys=True), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
