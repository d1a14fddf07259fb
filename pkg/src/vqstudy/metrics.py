"""Prediction-versus-MOS evaluation: SRCC/KRCC/PLCC/RMSE and the
five-parameter logistic mapping fitted before the accuracy criteria.

Rank criteria (SRCC, KRCC) are computed on raw predictions, since any
monotone mapping leaves ranks unchanged; PLCC and RMSE are computed on
logistic-mapped predictions. RMSE is reported both on the raw MOS scale
and rescaled to [0, 1] (divided by 100).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.stats import rankdata

from .ratings import MOSTable

__all__ = [
    "ConstantInputError",
    "IdentifierMismatchError",
    "PredictionSet",
    "LogisticParams",
    "EvalReport",
    "srcc",
    "krcc",
    "plcc",
    "rmse",
    "logistic5",
    "fit_logistic5",
    "fuse_views",
    "evaluate",
    "make_split",
]

# Clamp on the logistic exponent argument; exp(+/-500) stays finite in
# float64 while leaving the mapping effectively saturated.
EXP_CLAMP = 500.0

_VIEWS = ("left", "right", "fusion")


class ConstantInputError(ValueError):
    """Correlation is undefined because one input has zero variance."""


class IdentifierMismatchError(ValueError):
    """Two per-video tables do not cover the same video identifiers."""


@dataclass(frozen=True)
class PredictionSet:
    """Per-video predicted quality scores for one view channel."""

    videos: tuple[str, ...]
    scores: np.ndarray
    view: str = "fusion"

    def __post_init__(self):
        object.__setattr__(self, "videos", tuple(self.videos))
        object.__setattr__(self, "scores", np.asarray(self.scores, dtype=float).ravel())
        if self.view not in _VIEWS:
            raise ValueError(f"view must be one of {_VIEWS}, got {self.view!r}")
        if len(self.videos) != self.scores.size:
            raise ValueError("one score per video identifier is required")
        if len(set(self.videos)) != len(self.videos):
            raise ValueError("duplicate video identifiers in prediction set")
        if self.scores.size and not np.all(np.isfinite(self.scores)):
            raise ValueError("prediction scores must be finite")


@dataclass(frozen=True)
class LogisticParams:
    """Coefficients of the five-parameter logistic-plus-linear mapping."""

    b1: float
    b2: float
    b3: float
    b4: float
    b5: float

    def __post_init__(self):
        for name in ("b1", "b2", "b3", "b4", "b5"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"logistic parameter {name} is not finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.b1, self.b2, self.b3, self.b4, self.b5])


@dataclass(frozen=True)
class EvalReport:
    """Evaluation criteria for one prediction set against a MOS table."""

    view: str
    n: int
    srcc: float
    krcc: float
    plcc: float
    rmse: float
    rmse_raw: float
    params: LogisticParams
    warnings: tuple[str, ...] = ()

    def as_dict(self) -> dict:
        return {
            "view": self.view,
            "n": self.n,
            "srcc": self.srcc,
            "krcc": self.krcc,
            "plcc": self.plcc,
            "rmse": self.rmse,
            "rmse_raw": self.rmse_raw,
            "beta": list(self.params.as_array()),
            "warnings": list(self.warnings),
        }


def _pair(x, y, min_n: int):
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.size != y.size:
        raise ValueError(f"length mismatch: {x.size} vs {y.size}")
    if x.size < min_n:
        raise ValueError(f"need at least {min_n} samples, got {x.size}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("inputs must be finite")
    return x, y


def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    xm = x - x.mean()
    ym = y - y.mean()
    den = math.sqrt(float(np.dot(xm, xm)) * float(np.dot(ym, ym)))
    if den == 0.0:
        raise ConstantInputError("correlation is undefined for a constant input")
    return min(1.0, max(-1.0, float(np.dot(xm, ym)) / den))


def plcc(x, y) -> float:
    """Pearson linear correlation coefficient."""
    return _pearson(*_pair(x, y, 3))


def srcc(x, y) -> float:
    """Spearman rank correlation: Pearson correlation of midranks."""
    x, y = _pair(x, y, 3)
    return _pearson(rankdata(x), rankdata(y))


def krcc(x, y) -> float:
    """Kendall rank correlation, tau-b (tie-adjusted) variant."""
    x, y = _pair(x, y, 3)
    dx = np.sign(x[:, None] - x[None, :])
    dy = np.sign(y[:, None] - y[None, :])
    iu = np.triu_indices(x.size, k=1)
    prod = dx[iu] * dy[iu]
    concordant = int((prod > 0).sum())
    discordant = int((prod < 0).sum())
    n0 = x.size * (x.size - 1) // 2

    def tie_pairs(v):
        _, counts = np.unique(v, return_counts=True)
        return int((counts * (counts - 1) // 2).sum())

    den = math.sqrt((n0 - tie_pairs(x)) * (n0 - tie_pairs(y)))
    if den == 0.0:
        raise ConstantInputError("tau is undefined for a constant input")
    return min(1.0, max(-1.0, (concordant - discordant) / den))


def rmse(x, y) -> float:
    """Root mean squared error between two equal-length score vectors."""
    x, y = _pair(x, y, 1)
    d = x - y
    return math.sqrt(float(np.dot(d, d)) / d.size)


def logistic5(y, params) -> np.ndarray:
    """Five-parameter logistic-plus-linear mapping of scores ``y``."""
    if isinstance(params, LogisticParams):
        b1, b2, b3, b4, b5 = params.as_array()
    else:
        b1, b2, b3, b4, b5 = (float(p) for p in params)
    y = np.asarray(y, dtype=float)
    arg = np.clip(b2 * (y - b3), -EXP_CLAMP, EXP_CLAMP)
    return b1 * (0.5 - 1.0 / (1.0 + np.exp(arg))) + b4 * y + b5


def _logistic_column(y: np.ndarray, b2: float, b3: float) -> np.ndarray:
    arg = np.minimum(np.maximum(b2 * (y - b3), -EXP_CLAMP), EXP_CLAMP)
    return 0.5 - 1.0 / (1.0 + np.exp(arg))


def _vp_solve(y: np.ndarray, t: np.ndarray, b2: float, b3: float):
    """Best (b1, b4, b5) for fixed (b2, b3): the model is linear in them."""
    a = np.empty((y.size, 3))
    a[:, 0] = _logistic_column(y, b2, b3)
    a[:, 1] = y
    a[:, 2] = 1.0
    gram = a.T @ a
    try:
        coef = np.linalg.solve(gram, a.T @ t)
    except np.linalg.LinAlgError:
        coef, *_ = np.linalg.lstsq(a, t, rcond=None)
    r = a @ coef - t
    return float(r @ r), np.array([coef[0], b2, b3, coef[1], coef[2]])


def fit_logistic5(y, t) -> tuple[LogisticParams, np.ndarray]:
    """Least-squares fit of the five-parameter logistic mapping of ``y``
    onto targets ``t``.

    Multi-start Nelder-Mead descent (5 starts, perturbed from a
    data-driven initialization) with a linear-subproblem polish; the
    returned parameters never fit worse than the ordinary least-squares
    line (the b1=0 fallback). Deterministic: perturbations come from a
    generator seeded per call.
    """
    y, t = _pair(y, t, 6)
    if np.ptp(y) == 0.0:
        raise ConstantInputError("cannot fit a mapping on constant predictions")

    def sse(beta) -> float:
        r = logistic5(y, beta) - t
        return float(r @ r)

    corr = float(np.dot(y - y.mean(), t - t.mean()))
    sign = -1.0 if corr < 0 else 1.0
    a = np.column_stack([y, np.ones_like(y)])
    (b4_0, b5_0), *_ = np.linalg.lstsq(a, t, rcond=None)
    slope0 = 4.0 / float(np.ptp(y))
    x0 = np.array([float(np.ptp(t)), sign * slope0, float(y.mean()), float(b4_0), float(b5_0)])
    linear = np.array([0.0, x0[1], x0[2], float(b4_0), float(b5_0)])
    best_sse, best = sse(linear), linear

    def consider(cand_sse, cand):
        nonlocal best_sse, best
        if np.all(np.isfinite(cand)) and cand_sse < best_sse:
            best_sse, best = cand_sse, cand

    def vp_descend(b2, b3, budget=400):
        res = minimize(
            lambda p: _vp_solve(y, t, p[0], p[1])[0],
            np.array([b2, b3]),
            method="Nelder-Mead",
            options={"maxiter": budget, "maxfev": budget, "xatol": 1e-12, "fatol": 1e-14},
        )
        consider(*_vp_solve(y, t, float(res.x[0]), float(res.x[1])))

    # Stage 1: descend on (b2, b3) with the linear coefficients solved
    # exactly per step; both slope signs and several centers, since the
    # raw correlation can mislead the sign when the linear term
    # dominates the logistic one.
    q25, q50, q75 = np.quantile(y, [0.25, 0.5, 0.75])
    for b2 in (sign * slope0, -sign * slope0, sign * 4.0 * slope0):
        for b3 in (q50, q25, q75):
            vp_descend(b2, b3, budget=120)

    # Stage 2: full five-parameter simplex descent, one data-driven
    # start plus perturbed restarts, each polished by the linear
    # subproblem at its (b2, b3).
    rng = np.random.default_rng(20251231)
    scale = np.abs(x0) + np.array([1.0, 1e-3, 1.0, 1e-2, 1.0])
    starts = [x0, best.copy()]
    for _ in range(3):
        starts.append(x0 + 0.3 * scale * rng.standard_normal(5))
    for i, start in enumerate(starts):
        budget = 500 if i < 2 else 250
        res = minimize(
            sse,
            start,
            method="Nelder-Mead",
            options={"maxiter": 2000, "maxfev": budget, "xatol": 1e-10, "fatol": 1e-12},
        )
        consider(float(res.fun), np.asarray(res.x))
        consider(*_vp_solve(y, t, float(res.x[1]), float(res.x[2])))

    # Final polish from the winner.
    vp_descend(float(best[1]), float(best[2]), budget=400)

    params = LogisticParams(*(float(v) for v in best))
    return params, logistic5(y, params)


def fuse_views(left: PredictionSet, right: PredictionSet) -> PredictionSet:
    """Average left and right view predictions video by video."""
    if set(left.videos) != set(right.videos):
        only_left = sorted(set(left.videos) - set(right.videos))
        only_right = sorted(set(right.videos) - set(left.videos))
        raise IdentifierMismatchError(
            f"view identifier sets differ; only-left={only_left}, only-right={only_right}"
        )
    right_by_id = dict(zip(right.videos, right.scores))
    aligned = np.array([right_by_id[v] for v in left.videos])
    return PredictionSet(left.videos, (left.scores + aligned) / 2.0, "fusion")


def _monotone_warning(y: np.ndarray, params: LogisticParams) -> tuple[str, ...]:
    grid = np.linspace(float(y.min()), float(y.max()), 257)
    vals = logistic5(grid, params)
    d = np.diff(vals)
    tol = 1e-9 * (float(np.abs(vals).max()) + 1.0)
    if np.all(d >= -tol) or np.all(d <= tol):
        return ()
    return ("non-monotone-mapping",)


def evaluate(pred: PredictionSet, mos: MOSTable) -> EvalReport:
    """Score one prediction set against a MOS table.

    SRCC/KRCC are computed on the raw predictions; the five-parameter
    logistic mapping is fitted to the MOS targets and PLCC/RMSE are
    computed on the mapped predictions. A non-monotone fitted mapping
    is reported via the warnings field rather than as an error.
    """
    if set(pred.videos) != set(mos.videos):
        missing = sorted(set(mos.videos) - set(pred.videos))
        extra = sorted(set(pred.videos) - set(mos.videos))
        raise IdentifierMismatchError(
            f"prediction/MOS identifier mismatch; missing={missing}, extra={extra}"
        )
    if len(mos.videos) < 6:
        raise ValueError(f"evaluation needs at least 6 videos, got {len(mos.videos)}")
    by_id = dict(zip(pred.videos, pred.scores))
    y = np.array([by_id[v] for v in mos.videos])
    t = np.asarray(mos.mos, dtype=float)
    srcc_v = srcc(y, t)
    krcc_v = krcc(y, t)
    params, mapped = fit_logistic5(y, t)
    rmse_raw = rmse(mapped, t)
    return EvalReport(
        view=pred.view,
        n=int(y.size),
        srcc=srcc_v,
        krcc=krcc_v,
        plcc=plcc(mapped, t),
        rmse=rmse_raw / 100.0,
        rmse_raw=rmse_raw,
        params=params,
        warnings=_monotone_warning(y, params),
    )


def make_split(videos, ratio=(4, 1), seed: int = 0, groups=None) -> tuple[tuple[str, ...], tuple[str, ...]]:
    """Deterministic seeded train/test split of video identifiers.

    ``ratio`` is (train_parts, test_parts). When ``groups`` maps each
    video to a source-content key, whole sources are assigned to one
    side, so distorted variants of one source never straddle the split.
    Output preserves the input video order within each side.
    """
    videos = list(videos)
    if not videos:
        raise ValueError("cannot split an empty video list")
    train_parts, test_parts = ratio
    if train_parts <= 0 or test_parts <= 0:
        raise ValueError(f"ratio parts must be positive, got {ratio}")
    frac = train_parts / (train_parts + test_parts)
    rng = np.random.default_rng(seed)

    if groups is not None:
        missing = [v for v in videos if v not in groups]
        if missing:
            raise ValueError(f"videos without a source key: {missing[:5]}")
        units = list(dict.fromkeys(groups[v] for v in videos))
    else:
        units = videos
    if len(units) < 2:
        raise ValueError("need at least 2 units to form a non-empty split")
    n_train = int(math.floor(len(units) * frac + 0.5))
    n_train = min(max(n_train, 1), len(units) - 1)
    perm = rng.permutation(len(units))
    train_units = {units[i] for i in perm[:n_train]}

    def side(v) -> bool:
        return (groups[v] if groups is not None else v) in train_units

    train = tuple(v for v in videos if side(v))
    test = tuple(v for v in videos if not side(v))
    return train, test
