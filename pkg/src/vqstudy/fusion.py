"""Desk-scale forward pass of a binocular quality-fusion network.

The computation graph mirrors the staged spatial pipeline (patch embed,
downsample + block stages), binocular cross-attention from the left
view's queries onto the right view's keys/values, channel-wise
transposed attention with a residual connection, motion and semantic
feature concatenation from pluggable providers, and an MLP head
producing a scalar quality score.

Backbone internals are deliberately out of scope: stage blocks and
feature providers are small deterministic stand-ins behind interfaces,
sufficient to exercise the staging, fusion and head contracts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .metrics import plcc

__all__ = [
    "FeatureMap",
    "StagePlan",
    "AttentionParams",
    "IdentityBlock",
    "RandomMixingBlock",
    "ZeroProvider",
    "SeededStatProvider",
    "MeanPoolEmbed",
    "IdentityTransform",
    "SeededMixingTransform",
    "MlpHead",
    "FusionModel",
    "sample_key_frames",
    "embed_frames",
    "downsample",
    "stage_pipeline",
    "cross_attention",
    "transposed_attention",
    "motion_features",
    "semantic_features",
    "predict_quality",
    "plcc_objective",
    "toy_frames",
]


@dataclass(frozen=True)
class FeatureMap:
    """Dense feature tensor shaped (frames, channels, positions).

    ``grid`` records the (height, width) layout of the position axis so
    spatial downsampling stays well-defined.
    """

    values: np.ndarray
    grid: tuple[int, int]

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        object.__setattr__(self, "grid", (int(self.grid[0]), int(self.grid[1])))
        if self.values.ndim != 3:
            raise ValueError(f"feature map must be 3-D, got shape {self.values.shape}")
        if min(self.values.shape) < 1:
            raise ValueError(f"feature map dims must be positive, got {self.values.shape}")
        h, w = self.grid
        if h < 1 or w < 1 or h * w != self.values.shape[2]:
            raise ValueError(f"grid {self.grid} does not match {self.values.shape[2]} positions")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("feature map contains non-finite values")

    @property
    def frames(self) -> int:
        return self.values.shape[0]

    @property
    def channels(self) -> int:
        return self.values.shape[1]

    @property
    def positions(self) -> int:
        return self.values.shape[2]

    @classmethod
    def from_frames(cls, frames) -> "FeatureMap":
        """Treat an (N, H, W, C) frame stack as a feature map with C channels."""
        frames = np.asarray(frames, dtype=float)
        if frames.ndim != 4:
            raise ValueError(f"expected (frames, height, width, channels), got {frames.shape}")
        n, h, w, c = frames.shape
        return cls(frames.reshape(n, h * w, c).transpose(0, 2, 1), (h, w))


@dataclass(frozen=True)
class StagePlan:
    """Stage layout: block repeats, channel widths and downsample factors.

    ``channels`` has one more entry than ``blocks``: the input width
    followed by each stage's output width.
    """

    blocks: tuple[int, ...]
    channels: tuple[int, ...]
    factors: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(int(b) for b in self.blocks))
        object.__setattr__(self, "channels", tuple(int(c) for c in self.channels))
        object.__setattr__(self, "factors", tuple(int(f) for f in self.factors))
        if len(self.blocks) < 1:
            raise ValueError("a stage plan needs at least one stage")
        if len(self.channels) != len(self.blocks) + 1:
            raise ValueError("channels must list the input width plus one width per stage")
        if len(self.factors) != len(self.blocks):
            raise ValueError("one downsample factor per stage is required")
        if min(self.blocks) < 1 or min(self.channels) < 1 or min(self.factors) < 1:
            raise ValueError("blocks, channels and factors must be positive")

    @property
    def stages(self) -> int:
        return len(self.blocks)

    @classmethod
    def default(cls, c0: int = 8) -> "StagePlan":
        """Three early stages of 3, 4 and 21 blocks plus a final 5-block stage."""
        return cls((3, 4, 21, 5), (c0, 2 * c0, 4 * c0, 8 * c0, 8 * c0), (2, 2, 2, 2))

    @classmethod
    def toy(cls, c0: int = 4) -> "StagePlan":
        return cls((1, 2), (c0, 2 * c0, 2 * c0), (2, 2))


def _check_matrix(name: str, m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2:
        raise ValueError(f"{name} must be a 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} contains non-finite values")
    return m


@dataclass(frozen=True)
class AttentionParams:
    """Q/K/V projections, optional output projection and scaling factor.

    Projections are (in_channels, width) matrices applied to per-position
    channel vectors; ``w_p`` maps attended values back to an output
    channel count. ``scale`` defaults to the query/key width.
    """

    w_q: np.ndarray
    w_k: np.ndarray
    w_v: np.ndarray
    w_p: np.ndarray | None = None
    scale: float | None = None

    def __post_init__(self):
        for name in ("w_q", "w_k", "w_v"):
            object.__setattr__(self, name, _check_matrix(name, getattr(self, name)))
        if self.w_p is not None:
            object.__setattr__(self, "w_p", _check_matrix("w_p", self.w_p))
        if not (self.w_q.shape[0] == self.w_k.shape[0] == self.w_v.shape[0]):
            raise ValueError("Q/K/V projections must share the input channel count")
        if self.w_q.shape[1] != self.w_k.shape[1]:
            raise ValueError("Q and K projections must share their width")
        if self.scale is not None and not self.scale > 0:
            raise ValueError("scale must be strictly positive")

    @property
    def dk(self) -> float:
        return float(self.scale) if self.scale is not None else float(self.w_q.shape[1])

    @classmethod
    def seeded_cross(cls, channels: int, width: int, seed: int = 0, value_width: int | None = None) -> "AttentionParams":
        rng = np.random.default_rng((seed, 101, channels, width))
        value_width = channels if value_width is None else value_width
        s = 1.0 / math.sqrt(channels)
        return cls(
            rng.standard_normal((channels, width)) * s,
            rng.standard_normal((channels, width)) * s,
            rng.standard_normal((channels, value_width)) * s,
        )

    @classmethod
    def seeded_transposed(cls, channels: int, width: int, seed: int = 0) -> "AttentionParams":
        rng = np.random.default_rng((seed, 202, channels, width))
        s = 1.0 / math.sqrt(channels)
        return cls(
            rng.standard_normal((channels, width)) * s,
            rng.standard_normal((channels, width)) * s,
            rng.standard_normal((channels, width)) * s,
            rng.standard_normal((channels, width)) / math.sqrt(width),
        )


def _softmax(x: np.ndarray, axis: int) -> np.ndarray:
    shifted = x - x.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def sample_key_frames(n_frames: int, n_key: int) -> list[int]:
    """Uniformly spaced key-frame indices: floor(k * N / N_t)."""
    if n_key < 1:
        raise ValueError("at least one key frame is required")
    if n_key > n_frames:
        raise ValueError(f"cannot sample {n_key} key frames from {n_frames} frames")
    return [(k * n_frames) // n_key for k in range(n_key)]


def embed_frames(frames, out_channels: int, patch: int = 2, seed: int = 0) -> FeatureMap:
    """Non-overlapping patch embedding of an (N, H, W, C) frame stack."""
    frames = np.asarray(frames, dtype=float)
    if frames.ndim != 4:
        raise ValueError(f"expected (frames, height, width, channels), got {frames.shape}")
    n, h, w, c = frames.shape
    if h % patch or w % patch:
        raise ValueError(f"frame size {h}x{w} is not divisible by patch {patch}")
    gh, gw = h // patch, w // patch
    tiles = frames.reshape(n, gh, patch, gw, patch, c).transpose(0, 1, 3, 2, 4, 5)
    tiles = tiles.reshape(n, gh * gw, patch * patch * c)
    rng = np.random.default_rng((seed, 303, patch, c, out_channels))
    proj = rng.standard_normal((patch * patch * c, out_channels)) / math.sqrt(patch * patch * c)
    return FeatureMap((tiles @ proj).transpose(0, 2, 1), (gh, gw))


def downsample(fm: FeatureMap, factor: int) -> FeatureMap:
    """Non-overlapping average pooling of the position grid."""
    if factor == 1:
        return fm
    h, w = fm.grid
    if h % factor or w % factor:
        raise ValueError(f"grid {h}x{w} is not divisible by downsample factor {factor} (no implicit padding)")
    gh, gw = h // factor, w // factor
    v = fm.values.reshape(fm.frames, fm.channels, gh, factor, gw, factor).mean(axis=(3, 5))
    return FeatureMap(v.reshape(fm.frames, fm.channels, gh * gw), (gh, gw))


class IdentityBlock:
    """Stage block that passes features through unchanged."""

    name = "identity"

    def __call__(self, fm: FeatureMap, *, stage: int, index: int, out_channels: int) -> FeatureMap:
        if out_channels != fm.channels:
            raise ValueError(
                f"identity block cannot change channel width {fm.channels} -> {out_channels}"
            )
        return fm


@dataclass(frozen=True)
class RandomMixingBlock:
    """Seeded random linear channel mixing; weights are a pure function
    of (seed, stage, index, widths), so repeated runs are identical."""

    seed: int = 0
    name = "random-mixing"

    def __call__(self, fm: FeatureMap, *, stage: int, index: int, out_channels: int) -> FeatureMap:
        rng = np.random.default_rng((self.seed, 404, stage, index, fm.channels, out_channels))
        w = rng.standard_normal((out_channels, fm.channels)) / math.sqrt(fm.channels)
        return FeatureMap(np.einsum("oc,tcp->top", w, fm.values), fm.grid)


def stage_pipeline(f0: FeatureMap, plan: StagePlan, block, return_stages: bool = False):
    """Apply per-stage downsampling followed by the stage's block repeats.

    Returns the final feature map, or the per-stage outputs when
    ``return_stages`` is set.
    """
    if f0.channels != plan.channels[0]:
        raise ValueError(f"input has {f0.channels} channels but the plan expects {plan.channels[0]}")
    fm = f0
    stages = []
    for s, (repeats, factor) in enumerate(zip(plan.blocks, plan.factors)):
        fm = downsample(fm, factor)
        out_channels = plan.channels[s + 1]
        for b in range(repeats):
            fm = block(fm, stage=s, index=b, out_channels=out_channels)
            if fm.channels != out_channels:
                raise ValueError(
                    f"stage {s} block produced {fm.channels} channels, expected {out_channels}"
                )
        stages.append(fm)
    return stages if return_stages else fm


def cross_attention(f_left: FeatureMap, f_right: FeatureMap, p: AttentionParams, with_map: bool = False):
    """Fuse the right view into the left: queries from the left view,
    keys and values from the right, single-head, softmax over positions.

    ``with_map=True`` additionally returns the per-frame attention maps
    (frames, positions, positions) for diagnostics.
    """
    if f_left.values.shape != f_right.values.shape or f_left.grid != f_right.grid:
        raise ValueError(
            f"view shapes differ: {f_left.values.shape}/{f_left.grid} vs "
            f"{f_right.values.shape}/{f_right.grid}"
        )
    if p.w_q.shape[0] != f_left.channels:
        raise ValueError(f"projections expect {p.w_q.shape[0]} channels, features have {f_left.channels}")
    xl = f_left.values.transpose(0, 2, 1)
    xr = f_right.values.transpose(0, 2, 1)
    q = xl @ p.w_q
    k = xr @ p.w_k
    v = xr @ p.w_v
    attn = _softmax(q @ k.transpose(0, 2, 1) / math.sqrt(p.dk), axis=2)
    out = FeatureMap((attn @ v).transpose(0, 2, 1), f_left.grid)
    return (out, attn) if with_map else out


def transposed_attention(f_c: FeatureMap, p: AttentionParams, with_map: bool = False):
    """Channel attention: Q/K contract over positions into a width-by-width
    map, softmax over the channel axis, then project back and add the
    residual input.

    ``with_map=True`` additionally returns the per-frame channel
    attention maps (frames, width, width).
    """
    if p.w_q.shape[0] != f_c.channels:
        raise ValueError(f"projections expect {p.w_q.shape[0]} channels, features have {f_c.channels}")
    if p.w_v.shape[1] != p.w_q.shape[1]:
        raise ValueError("transposed attention needs matching Q/K/V widths")
    if p.w_p is None:
        raise ValueError("transposed attention requires an output projection")
    if p.w_p.shape != (f_c.channels, p.w_v.shape[1]):
        raise ValueError(
            f"output projection shape {p.w_p.shape} cannot map width {p.w_v.shape[1]} "
            f"back to {f_c.channels} channels"
        )
    q = np.einsum("cd,tcp->tdp", p.w_q, f_c.values)
    k = np.einsum("cd,tcp->tdp", p.w_k, f_c.values)
    v = np.einsum("cd,tcp->tdp", p.w_v, f_c.values)
    attn = _softmax(q @ k.transpose(0, 2, 1) / math.sqrt(p.dk), axis=2)
    projected = np.einsum("cd,tdp->tcp", p.w_p, attn @ v)
    out = FeatureMap(projected + f_c.values, f_c.grid)
    return (out, attn) if with_map else out


@dataclass(frozen=True)
class ZeroProvider:
    """Feature provider returning a zero vector of the declared width."""

    width: int
    name: str = "zero"

    def __call__(self, frames) -> np.ndarray:
        return np.zeros(self.width)


@dataclass(frozen=True)
class SeededStatProvider:
    """Motion stand-in: per-channel intensity and temporal-difference
    statistics pushed through a seeded random projection."""

    width: int
    seed: int = 0
    name: str = "seeded-stats"

    def __call__(self, frames) -> np.ndarray:
        frames = np.asarray(frames, dtype=float)
        if frames.ndim != 4:
            raise ValueError(f"expected (frames, height, width, channels), got {frames.shape}")
        c = frames.shape[3]
        mean = frames.mean(axis=(0, 1, 2))
        std = frames.std(axis=(0, 1, 2))
        if frames.shape[0] > 1:
            motion = np.abs(np.diff(frames, axis=0)).mean(axis=(0, 1, 2))
        else:
            motion = np.zeros(c)
        stats = np.concatenate([mean, std, motion])
        rng = np.random.default_rng((self.seed, 505, c, self.width))
        proj = rng.standard_normal((self.width, stats.size)) / math.sqrt(stats.size)
        return proj @ stats


@dataclass(frozen=True)
class MeanPoolEmbed:
    """Semantic patch-embed stand-in: global mean pooling per channel
    followed by a seeded random projection."""

    width: int
    seed: int = 0
    name: str = "mean-pool-embed"

    def __call__(self, frames) -> np.ndarray:
        frames = np.asarray(frames, dtype=float)
        if frames.ndim != 4:
            raise ValueError(f"expected (frames, height, width, channels), got {frames.shape}")
        pooled = frames.mean(axis=(0, 1, 2))
        rng = np.random.default_rng((self.seed, 606, pooled.size, self.width))
        proj = rng.standard_normal((self.width, pooled.size)) / math.sqrt(pooled.size)
        return proj @ pooled


class IdentityTransform:
    """Vector transform stand-in that returns its input."""

    name = "identity"

    def __call__(self, vec: np.ndarray) -> np.ndarray:
        return vec


@dataclass(frozen=True)
class SeededMixingTransform:
    """Stacked seeded mixing layers with a tanh nonlinearity."""

    layers: int = 2
    seed: int = 0
    name: str = "seeded-mixing"

    def __call__(self, vec: np.ndarray) -> np.ndarray:
        vec = np.asarray(vec, dtype=float)
        for layer in range(self.layers):
            rng = np.random.default_rng((self.seed, 707, layer, vec.size))
            w = rng.standard_normal((vec.size, vec.size)) / math.sqrt(vec.size)
            vec = np.tanh(w @ vec)
        return vec


def _provider_output(provider, frames) -> np.ndarray:
    out = np.asarray(provider(frames), dtype=float).ravel()
    if out.size != provider.width:
        raise ValueError(
            f"provider {getattr(provider, 'name', provider)!r} produced width {out.size}, "
            f"declared {provider.width}"
        )
    return out


def motion_features(x_left, x_right, provider) -> np.ndarray:
    """Concatenated per-view motion features, left half first."""
    x_left = np.asarray(x_left, dtype=float)
    x_right = np.asarray(x_right, dtype=float)
    if x_left.shape[0] != x_right.shape[0]:
        raise ValueError("left and right sequences must have the same length")
    return np.concatenate([_provider_output(provider, x_left), _provider_output(provider, x_right)])


def semantic_features(y_left, y_right, patch_embed, transform) -> np.ndarray:
    """Concatenated per-view semantic features: transform(embed(view)),
    left half first."""
    y_left = np.asarray(y_left, dtype=float)
    y_right = np.asarray(y_right, dtype=float)
    if y_left.shape[0] != y_right.shape[0]:
        raise ValueError("left and right key-frame stacks must have the same length")
    left = np.asarray(transform(_provider_output(patch_embed, y_left)), dtype=float).ravel()
    right = np.asarray(transform(_provider_output(patch_embed, y_right)), dtype=float).ravel()
    return np.concatenate([left, right])


@dataclass(frozen=True)
class MlpHead:
    """Two-layer perceptron with a rectifier hidden layer and scalar output."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: float

    def __post_init__(self):
        object.__setattr__(self, "w1", _check_matrix("w1", self.w1))
        object.__setattr__(self, "b1", np.asarray(self.b1, dtype=float).ravel())
        object.__setattr__(self, "w2", np.asarray(self.w2, dtype=float).ravel())
        object.__setattr__(self, "b2", float(self.b2))
        if self.b1.size != self.w1.shape[0] or self.w2.size != self.w1.shape[0]:
            raise ValueError("hidden-layer widths of w1, b1 and w2 disagree")

    @property
    def in_width(self) -> int:
        return self.w1.shape[1]

    @classmethod
    def seeded(cls, in_width: int, hidden: int = 128, seed: int = 0) -> "MlpHead":
        rng = np.random.default_rng((seed, 808, in_width, hidden))
        return cls(
            rng.standard_normal((hidden, in_width)) / math.sqrt(in_width),
            rng.standard_normal(hidden) * 0.1,
            rng.standard_normal(hidden) / math.sqrt(hidden),
            float(rng.standard_normal()),
        )

    @classmethod
    def zeros(cls, in_width: int, hidden: int = 8, bias: float = 0.0) -> "MlpHead":
        return cls(np.zeros((hidden, in_width)), np.zeros(hidden), np.zeros(hidden), bias)


def predict_quality(f_v: FeatureMap, f_m, f_s, head: MlpHead) -> float:
    """MLP head on the concatenation of pooled spatial, motion and
    semantic features. The spatial map is mean-pooled over frames and
    positions before concatenation."""
    pooled = f_v.values.mean(axis=(0, 2))
    x = np.concatenate([pooled, np.asarray(f_m, dtype=float).ravel(), np.asarray(f_s, dtype=float).ravel()])
    if x.size != head.in_width:
        raise ValueError(f"head expects input width {head.in_width}, got {x.size}")
    hidden = np.maximum(head.w1 @ x + head.b1, 0.0)
    return float(head.w2 @ hidden + head.b2)


def plcc_objective(predicted, target) -> float:
    """Batch training objective: the Pearson correlation itself (to be
    maximized). Shares the plcc implementation used for evaluation."""
    return plcc(predicted, target)


def toy_frames(seed: int, n_frames: int = 8, height: int = 8, width: int = 8, channels: int = 3) -> np.ndarray:
    """Seeded random frame stack in [0, 1] for demos and tests."""
    rng = np.random.default_rng((seed, 909))
    return rng.random((n_frames, height, width, channels))


@dataclass(frozen=True)
class FusionModel:
    """All parameters of the toy fusion graph, with a forward pass.

    ``forward(left)`` runs the single-view graph (no cross-attention,
    no per-view concatenation); ``forward(left, right)`` runs the full
    binocular graph.
    """

    plan: StagePlan
    block: object
    embed_channels: int
    patch: int
    embed_seed: int
    cross: AttentionParams | None
    transposed: AttentionParams
    motion: object
    semantic_embed: object
    semantic_transform: object
    head: MlpHead
    n_key_frames: int = 8

    @classmethod
    def seeded(
        cls,
        seed: int = 0,
        single_view: bool = False,
        plan: StagePlan | None = None,
        patch: int = 2,
        n_key_frames: int = 4,
        motion_width: int = 6,
        semantic_width: int = 5,
        hidden: int = 16,
    ) -> "FusionModel":
        plan = plan if plan is not None else StagePlan.toy()
        c_last = plan.channels[-1]
        views = 1 if single_view else 2
        return cls(
            plan=plan,
            block=RandomMixingBlock(seed),
            embed_channels=plan.channels[0],
            patch=patch,
            embed_seed=seed,
            cross=None if single_view else AttentionParams.seeded_cross(c_last, c_last, seed, value_width=c_last),
            transposed=AttentionParams.seeded_transposed(c_last, c_last, seed),
            motion=SeededStatProvider(motion_width, seed),
            semantic_embed=MeanPoolEmbed(semantic_width, seed),
            semantic_transform=SeededMixingTransform(2, seed),
            head=MlpHead.seeded(c_last + views * (motion_width + semantic_width), hidden, seed),
            n_key_frames=n_key_frames,
        )

    def spatial_features(self, frames) -> FeatureMap:
        idx = sample_key_frames(np.asarray(frames).shape[0], self.n_key_frames)
        f0 = embed_frames(np.asarray(frames, dtype=float)[idx], self.embed_channels, self.patch, self.embed_seed)
        return stage_pipeline(f0, self.plan, self.block)

    def forward(self, left, right=None) -> float:
        left = np.asarray(left, dtype=float)
        idx = sample_key_frames(left.shape[0], self.n_key_frames)
        f_left = self.spatial_features(left)
        if right is None:
            f_v = transposed_attention(f_left, self.transposed)
            f_m = _provider_output(self.motion, left)
            f_s = np.asarray(
                self.semantic_transform(_provider_output(self.semantic_embed, left[idx])), dtype=float
            ).ravel()
        else:
            right = np.asarray(right, dtype=float)
            if right.shape != left.shape:
                raise ValueError(f"view shapes differ: {left.shape} vs {right.shape}")
            if self.cross is None:
                raise ValueError("this model was built single-view; no cross-attention parameters")
            f_right = self.spatial_features(right)
            f_c = cross_attention(f_left, f_right, self.cross)
            f_v = transposed_attention(f_c, self.transposed)
            f_m = motion_features(left, right, self.motion)
            f_s = semantic_features(left[idx], right[idx], self.semantic_embed, self.semantic_transform)
        return predict_quality(f_v, f_m, f_s, self.head)
