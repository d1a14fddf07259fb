"""Study-file ingestion, cross-validation and deterministic report emission.

File schemas:
  ratings      CSV ``subject_id,video_id,score``
  predictions  CSV ``video_id,view,score`` with view in {left, right, fusion}
  MOS table    CSV ``video_id,mos,std,n,ci`` (floats in round-trip repr)
  curve        CSV ``k,discriminability_mean,ci_mean,trials``
  manifest     JSON document (see :class:`StudyManifest`)

Emitted tables carry ``# key=value`` comment lines (seed, config hash,
confidence level) so every report is self-describing; readers skip them.
Ingestion collects every referential problem before failing, each with
its 1-based data row number.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .metrics import PredictionSet
from .ratings import MOSTable, RatingMatrix, ScreeningPolicy, ScreeningReport
from .reliability import ReliabilityCurvePoint

__all__ = [
    "IngestError",
    "VideoRecord",
    "StudyManifest",
    "RunConfig",
    "load_manifest",
    "save_manifest",
    "read_ratings",
    "read_predictions",
    "write_mos",
    "read_mos",
    "write_curve",
    "write_screening",
    "write_table",
    "write_ratings",
    "write_predictions",
    "write_json",
    "config_digest",
]

_VIEWS = ("left", "right", "fusion")


class IngestError(ValueError):
    """One or more input-file problems; ``problems`` lists all of them."""

    def __init__(self, problems):
        self.problems = tuple(problems)
        super().__init__("; ".join(self.problems))


@dataclass(frozen=True)
class VideoRecord:
    """One stimulus: identifier, source-content key, bitrate label and
    the view channels available for it."""

    video_id: str
    source: str
    bitrate: str = ""
    views: tuple[str, ...] = ("left", "right")

    def __post_init__(self):
        object.__setattr__(self, "views", tuple(self.views))
        bad = [v for v in self.views if v not in _VIEWS]
        if bad:
            raise ValueError(f"video {self.video_id!r} declares unknown views {bad}")


@dataclass(frozen=True)
class StudyManifest:
    """Study roster: video records, subjects, scale bounds and metadata."""

    videos: tuple[VideoRecord, ...]
    subjects: tuple[str, ...]
    scale: tuple[float, float] = (1.0, 10.0)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "videos", tuple(self.videos))
        object.__setattr__(self, "subjects", tuple(self.subjects))
        ids = [v.video_id for v in self.videos]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate video identifiers in manifest")
        if len(set(self.subjects)) != len(self.subjects):
            raise ValueError("duplicate subject identifiers in manifest")
        if not self.scale[0] < self.scale[1]:
            raise ValueError(f"invalid scale bounds {self.scale}")
        for v in self.videos:
            if not v.source:
                raise ValueError(f"video {v.video_id!r} has an empty source key")

    @property
    def video_ids(self) -> tuple[str, ...]:
        return tuple(v.video_id for v in self.videos)

    @property
    def sources(self) -> dict:
        return {v.video_id: v.source for v in self.videos}


def load_manifest(path) -> StudyManifest:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    videos = tuple(
        VideoRecord(v["video_id"], v["source"], v.get("bitrate", ""), tuple(v.get("views", ("left", "right"))))
        for v in doc["videos"]
    )
    return StudyManifest(
        videos,
        tuple(doc.get("subjects", ())),
        tuple(doc.get("scale", (1.0, 10.0))),
        dict(doc.get("metadata", {})),
    )


def save_manifest(manifest: StudyManifest, path) -> None:
    doc = {
        "scale": list(manifest.scale),
        "subjects": list(manifest.subjects),
        "videos": [
            {"video_id": v.video_id, "source": v.source, "bitrate": v.bitrate, "views": list(v.views)}
            for v in manifest.videos
        ],
        "metadata": manifest.metadata,
    }
    write_json(doc, path)


def _data_rows(path):
    """Yield (1-based data row number, fields) skipping comment lines."""
    text = Path(path).read_text(encoding="utf-8")
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    reader = csv.reader(io.StringIO("\n".join(lines)))
    rows = list(reader)
    if not rows:
        raise IngestError([f"{path}: file is empty"])
    return rows[0], list(enumerate(rows[1:], start=1))


def read_ratings(path, manifest: StudyManifest | None = None, scale=None) -> RatingMatrix:
    """Parse and cross-validate a ratings CSV into a RatingMatrix.

    With a manifest, subject and video identifiers must exist in the
    roster and its scale bounds apply; without one, identifiers are
    taken in order of first appearance. All problems are collected and
    raised together as a single IngestError.
    """
    header, rows = _data_rows(path)
    problems = []
    if [h.strip() for h in header] != ["subject_id", "video_id", "score"]:
        raise IngestError([f"{path}: expected header subject_id,video_id,score, got {','.join(header)}"])
    scale = scale or (manifest.scale if manifest else (1.0, 10.0))
    known_videos = set(manifest.video_ids) if manifest else None
    known_subjects = set(manifest.subjects) if manifest and manifest.subjects else None

    parsed = []
    subjects: dict[str, None] = {}
    videos: dict[str, None] = {}
    first_row: dict[tuple[str, str], int] = {}
    for rowno, fields in rows:
        if len(fields) != 3:
            problems.append(f"row {rowno}: expected 3 fields, got {len(fields)}")
            continue
        subj, vid, raw = (f.strip() for f in fields)
        try:
            score = float(raw)
        except ValueError:
            problems.append(f"row {rowno}: score {raw!r} is not a number")
            continue
        if known_subjects is not None and subj not in known_subjects:
            problems.append(f"row {rowno}: unknown subject {subj!r}")
            continue
        if known_videos is not None and vid not in known_videos:
            problems.append(f"row {rowno}: unknown video {vid!r}")
            continue
        if not scale[0] <= score <= scale[1]:
            problems.append(f"row {rowno}: score {score} outside scale [{scale[0]}, {scale[1]}]")
            continue
        key = (subj, vid)
        if key in first_row:
            problems.append(f"rows {first_row[key]} and {rowno}: duplicate rating for {key}")
            continue
        first_row[key] = rowno
        subjects.setdefault(subj)
        videos.setdefault(vid)
        parsed.append((subj, vid, score))
    if problems:
        raise IngestError(problems)
    if not parsed:
        raise IngestError([f"{path}: no ratings found"])

    subject_list = list(manifest.subjects) if known_subjects is not None else list(subjects)
    video_list = list(manifest.video_ids) if known_videos is not None else list(videos)
    if known_subjects is not None:
        subject_list = [s for s in subject_list if s in subjects]
    if known_videos is not None:
        video_list = [v for v in video_list if v in videos]
    si = {s: i for i, s in enumerate(subject_list)}
    vi = {v: j for j, v in enumerate(video_list)}
    scores = np.zeros((len(subject_list), len(video_list)))
    mask = np.zeros_like(scores, dtype=bool)
    for subj, vid, score in parsed:
        scores[si[subj], vi[vid]] = score
        mask[si[subj], vi[vid]] = True
    return RatingMatrix(tuple(subject_list), tuple(video_list), scores, mask, scale)


def read_predictions(path, manifest: StudyManifest | None = None) -> dict[str, PredictionSet]:
    """Parse a predictions CSV into one PredictionSet per view present."""
    header, rows = _data_rows(path)
    problems = []
    if [h.strip() for h in header] != ["video_id", "view", "score"]:
        raise IngestError([f"{path}: expected header video_id,view,score, got {','.join(header)}"])
    known_videos = set(manifest.video_ids) if manifest else None
    per_view: dict[str, dict[str, float]] = {}
    first_row: dict[tuple[str, str], int] = {}
    for rowno, fields in rows:
        if len(fields) != 3:
            problems.append(f"row {rowno}: expected 3 fields, got {len(fields)}")
            continue
        vid, view, raw = (f.strip() for f in fields)
        if view not in _VIEWS:
            problems.append(f"row {rowno}: unknown view {view!r}")
            continue
        try:
            score = float(raw)
        except ValueError:
            problems.append(f"row {rowno}: score {raw!r} is not a number")
            continue
        if known_videos is not None and vid not in known_videos:
            problems.append(f"row {rowno}: unknown video {vid!r}")
            continue
        key = (vid, view)
        if key in first_row:
            problems.append(f"rows {first_row[key]} and {rowno}: duplicate prediction for {key}")
            continue
        first_row[key] = rowno
        per_view.setdefault(view, {})[vid] = score
    if problems:
        raise IngestError(problems)
    if not per_view:
        raise IngestError([f"{path}: no predictions found"])
    out = {}
    for view in (v for v in _VIEWS if v in per_view):
        table = per_view[view]
        order = [v for v in (manifest.video_ids if manifest else table) if v in table]
        out[view] = PredictionSet(tuple(order), np.array([table[v] for v in order]), view)
    return out


def _comment_lines(meta: dict) -> list[str]:
    return [f"# {k}={meta[k]}" for k in sorted(meta)]


def write_table(path, meta: dict, header: list[str], rows) -> None:
    buf = io.StringIO()
    for line in _comment_lines(meta):
        buf.write(line + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def write_mos(mos: MOSTable, path, meta: dict | None = None) -> None:
    meta = dict(meta or {})
    meta["level"] = repr(mos.level)
    rows = [
        [v, repr(float(m)), repr(float(s)), int(n), repr(float(c))]
        for v, m, s, n, c in zip(mos.videos, mos.mos, mos.std, mos.n, mos.ci)
    ]
    write_table(path, meta, ["video_id", "mos", "std", "n", "ci"], rows)


def read_mos(path) -> MOSTable:
    """Re-ingest an emitted MOS table; float fields round-trip exactly."""
    text = Path(path).read_text(encoding="utf-8")
    level = 0.95
    for line in text.splitlines():
        if line.startswith("# level="):
            level = float(line.split("=", 1)[1])
    header, rows = _data_rows(path)
    if [h.strip() for h in header] != ["video_id", "mos", "std", "n", "ci"]:
        raise IngestError([f"{path}: expected header video_id,mos,std,n,ci, got {','.join(header)}"])
    videos, mos, std, n, ci = [], [], [], [], []
    for rowno, fields in rows:
        if len(fields) != 5:
            raise IngestError([f"row {rowno}: expected 5 fields, got {len(fields)}"])
        videos.append(fields[0])
        mos.append(float(fields[1]))
        std.append(float(fields[2]))
        n.append(int(fields[3]))
        ci.append(float(fields[4]))
    return MOSTable(tuple(videos), np.array(mos), np.array(std), np.array(n, dtype=np.int64), np.array(ci), level)


def write_curve(points: list[ReliabilityCurvePoint], path, meta: dict | None = None) -> None:
    rows = [[p.k, repr(float(p.discriminability)), repr(float(p.mean_ci)), p.trials] for p in points]
    write_table(path, dict(meta or {}), ["k", "discriminability_mean", "ci_mean", "trials"], rows)


def write_screening(report: ScreeningReport, path, meta: dict | None = None) -> None:
    rows = [
        [s, int(p), int(q), int(r)]
        for s, p, q, r in zip(report.subjects, report.p_counts, report.q_counts, report.rejected)
    ]
    write_table(path, dict(meta or {}), ["subject_id", "p_count", "q_count", "rejected"], rows)


def write_ratings(matrix: RatingMatrix, path, meta: dict | None = None) -> None:
    rows = [
        [s, v, repr(float(matrix.scores[i, j]))]
        for i, s in enumerate(matrix.subjects)
        for j, v in enumerate(matrix.videos)
        if matrix.mask[i, j]
    ]
    write_table(path, dict(meta or {}), ["subject_id", "video_id", "score"], rows)


def write_predictions(predsets, path, meta: dict | None = None) -> None:
    rows = [
        [v, ps.view, repr(float(s))]
        for ps in predsets
        for v, s in zip(ps.videos, ps.scores)
    ]
    write_table(path, dict(meta or {}), ["video_id", "view", "score"], rows)


def write_json(doc, path) -> None:
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class RunConfig:
    """Resolved parameters of one CLI run.

    The config digest covers every parameter that affects computed
    content; the output directory is excluded so equal configurations
    written to different places stay byte-identical.
    """

    command: str
    ratings: str | None = None
    predictions: str | None = None
    manifest: str | None = None
    out: str | None = None
    seed: int = 0
    alpha: float = 0.05
    level: float = 0.95
    ratio: tuple[int, int] = (4, 1)
    group_by_source: bool = False
    trials: int = 100
    k_values: tuple[int, ...] | None = None
    policy: ScreeningPolicy = field(default_factory=ScreeningPolicy)

    def as_dict(self) -> dict:
        return {
            "command": self.command,
            "ratings": self.ratings,
            "predictions": self.predictions,
            "manifest": self.manifest,
            "seed": self.seed,
            "alpha": self.alpha,
            "level": self.level,
            "ratio": list(self.ratio),
            "group_by_source": self.group_by_source,
            "trials": self.trials,
            "k_values": list(self.k_values) if self.k_values is not None else None,
            "policy": {
                "kurtosis_low": self.policy.kurtosis_low,
                "kurtosis_high": self.policy.kurtosis_high,
                "normal_multiplier": self.policy.normal_multiplier,
                "nonnormal_multiplier": self.policy.nonnormal_multiplier,
                "max_outlier_fraction": self.policy.max_outlier_fraction,
                "asymmetry_floor": self.policy.asymmetry_floor,
            },
        }


def config_digest(config: RunConfig) -> str:
    return hashlib.sha256(json.dumps(config.as_dict(), sort_keys=True).encode("utf-8")).hexdigest()
