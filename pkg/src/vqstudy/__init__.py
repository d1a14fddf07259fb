"""vqstudy: statistics engine and evaluation harness for subjective
video-quality studies, plus a desk-scale binocular fusion predictor."""

from .metrics import (
    EvalReport,
    LogisticParams,
    PredictionSet,
    evaluate,
    fit_logistic5,
    fuse_views,
    krcc,
    logistic5,
    make_split,
    plcc,
    rmse,
    srcc,
)
from .ratings import (
    MOSTable,
    RatingMatrix,
    RescaledScores,
    ScreeningPolicy,
    ScreeningReport,
    SubjectStats,
    compute_mos,
    screen_subjects,
    subject_stats,
    zscore_rescale,
)
from .reliability import (
    ReliabilityCurvePoint,
    TestResult,
    discriminability,
    mean_ci,
    subsample_curve,
    wilcoxon_ranksum,
)

__version__ = "0.1.0"

__all__ = [
    "EvalReport",
    "LogisticParams",
    "MOSTable",
    "PredictionSet",
    "RatingMatrix",
    "ReliabilityCurvePoint",
    "RescaledScores",
    "ScreeningPolicy",
    "ScreeningReport",
    "SubjectStats",
    "TestResult",
    "compute_mos",
    "discriminability",
    "evaluate",
    "fit_logistic5",
    "fuse_views",
    "krcc",
    "logistic5",
    "make_split",
    "mean_ci",
    "plcc",
    "rmse",
    "screen_subjects",
    "srcc",
    "subject_stats",
    "subsample_curve",
    "wilcoxon_ranksum",
    "zscore_rescale",
]
