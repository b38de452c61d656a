"""Multiscale video UNet noise predictor with condition fusion.

Per resolution level, each block applies: residual convs with a timestep
projection, zero-initialized scale-shift fusion of the image / mask /
trajectory controls (in that order), caption cross-attention, and temporal
self-attention across the frame axis. Frames ride the batch axis of every
2-D op; only temporal attention mixes across frames.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .conditions import ConditionPyramid, Module, TextEmbedding, conv_weight, dense_weight
from .tensor import (
    ShapeError,
    Tensor,
    add,
    attention,
    avg_pool2d,
    bias_add_channel,
    bias_add_last,
    concat,
    conv2d,
    matmul,
    mul,
    reshape,
    silu,
    tile_leading,
    transpose,
    upsample_nearest2x,
)


@dataclass(frozen=True)
class UNetConfig:
    levels: int = 3
    channels: tuple = (32, 64, 128)
    frames: int = 8
    height: int = 32
    width: int = 32
    in_channels: int = 3
    image_cond_channels: int = 16
    trajectory_cond_channels: int = 16
    text_dim: int = 64
    heads: int = 2
    time_dim: int = 64

    def __post_init__(self):
        if self.levels < 1:
            raise ShapeError(f"levels must be >= 1, got {self.levels}")
        if len(self.channels) != self.levels:
            raise ShapeError(
                f"{self.levels} levels need {self.levels} channel widths, got {self.channels}"
            )
        factor = 2 ** (self.levels - 1)
        if self.height % factor or self.width % factor:
            raise ShapeError(
                f"{self.height}x{self.width} not divisible by 2^{self.levels - 1}"
            )
        for c in self.channels:
            if c % self.heads:
                raise ShapeError(f"channel width {c} not divisible by {self.heads} heads")


def sinusoidal_time_embedding(t: float, dim: int) -> np.ndarray:
    """Classic sin/cos ladder over geometrically spaced frequencies."""
    half = dim // 2
    freqs = np.exp(-math.log(10000.0) * np.arange(half, dtype=np.float64) / max(half - 1, 1))
    ang = float(t) * freqs
    emb = np.concatenate([np.sin(ang), np.cos(ang)])
    if dim % 2:
        emb = np.concatenate([emb, np.zeros(1)])
    return emb


class ResBlock(Module):
    """3x3 conv pair with an additive timestep projection and identity skip."""

    def __init__(self, name: str, cin: int, cout: int, time_dim: int, rng: np.random.Generator):
        super().__init__(name)
        self.cin, self.cout = cin, cout
        self.w1 = self.param("conv1.weight", conv_weight(rng, cout, cin, 3))
        self.b1 = self.param("conv1.bias", np.zeros(cout))
        self.wt = self.param("time.weight", dense_weight(rng, time_dim, cout))
        self.w2 = self.param("conv2.weight", conv_weight(rng, cout, cout, 3))
        self.b2 = self.param("conv2.bias", np.zeros(cout))
        if cin != cout:
            self.ws = self.param("skip.weight", conv_weight(rng, cout, cin, 1))
            self.bs = self.param("skip.bias", np.zeros(cout))
        else:
            self.ws = None
            self.bs = None

    def __call__(self, x: Tensor, temb: Tensor) -> Tensor:
        h = conv2d(x, self.w1.tensor, self.b1.tensor, padding=1)
        tproj = reshape(matmul(reshape(temb, (1, temb.shape[0])), self.wt.tensor), (self.cout,))
        h = silu(bias_add_channel(h, tproj))
        h = conv2d(h, self.w2.tensor, self.b2.tensor, padding=1)
        skip = x if self.ws is None else conv2d(x, self.ws.tensor, self.bs.tensor)
        return add(h, skip)


class FusionLayer(Module):
    """Scale-shift injection of the three spatial controls.

    Each control feeds two 1x1 projections giving a multiplicative map w and
    an additive map b; the hidden state updates as h := w*h + b + h, applied
    for the image, then the mask, then the trajectory. Every projection
    starts at exactly zero, so a fresh layer is a no-op.
    """

    ORDER = ("image", "mask", "trajectory")

    def __init__(self, name: str, hidden_channels: int, image_channels: int, trajectory_channels: int):
        super().__init__(name)
        self.hidden_channels = hidden_channels
        cond_channels = {
            "image": image_channels,
            "mask": 1,
            "trajectory": trajectory_channels,
        }
        self.proj = {}
        for key in self.ORDER:
            c = cond_channels[key]
            self.proj[key] = (
                self.param(f"{key}.scale.weight", np.zeros((hidden_channels, c, 1, 1))),
                self.param(f"{key}.scale.bias", np.zeros(hidden_channels)),
                self.param(f"{key}.shift.weight", np.zeros((hidden_channels, c, 1, 1))),
                self.param(f"{key}.shift.bias", np.zeros(hidden_channels)),
            )

    def __call__(self, h: Tensor, image: Tensor, mask: Tensor, trajectory: Tensor) -> Tensor:
        conds = {"image": image, "mask": mask, "trajectory": trajectory}
        for key in self.ORDER:
            cond = conds[key]
            if cond.shape[0] != h.shape[0] or cond.shape[2:] != h.shape[2:]:
                raise ShapeError(
                    f"{self.name}: {key} condition {cond.shape} does not sit on hidden {h.shape}"
                )
            sw, sb, tw, tb = self.proj[key]
            scale = conv2d(cond, sw.tensor, sb.tensor)
            shift = conv2d(cond, tw.tensor, tb.tensor)
            h = add(add(mul(scale, h), shift), h)
        return h


def _split_heads(x: Tensor, heads: int) -> Tensor:
    """(B, L, C) -> (B*heads, L, C/heads)."""
    b, l, c = x.shape
    x = reshape(x, (b, l, heads, c // heads))
    x = transpose(x, (0, 2, 1, 3))
    return reshape(x, (b * heads, l, c // heads))


def _merge_heads(x: Tensor, heads: int) -> Tensor:
    bh, l, d = x.shape
    x = reshape(x, (bh // heads, heads, l, d))
    x = transpose(x, (0, 2, 1, 3))
    return reshape(x, (bh // heads, l, heads * d))


class CrossAttention(Module):
    """Spatial positions attend over caption tokens; residual output with a
    zero-initialized projection so a fresh layer passes h through exactly."""

    def __init__(self, name: str, channels: int, text_dim: int, heads: int, rng: np.random.Generator):
        super().__init__(name)
        self.channels = channels
        self.heads = heads
        self.wq = self.param("query.weight", conv_weight(rng, channels, channels, 1))
        self.bq = self.param("query.bias", np.zeros(channels))
        self.wk = self.param("key.weight", dense_weight(rng, text_dim, channels))
        self.wv = self.param("value.weight", dense_weight(rng, text_dim, channels))
        self.wo = self.param("out.weight", np.zeros((channels, channels, 1, 1)))
        self.bo = self.param("out.bias", np.zeros(channels))

    def __call__(self, h: Tensor, text: TextEmbedding) -> Tensor:
        L, C, H, W = h.shape
        q = conv2d(h, self.wq.tensor, self.bq.tensor)
        q = reshape(transpose(q, (0, 2, 3, 1)), (L, H * W, C))
        k = tile_leading(matmul(text.value, self.wk.tensor), L)
        v = tile_leading(matmul(text.value, self.wv.tensor), L)
        att = attention(_split_heads(q, self.heads), _split_heads(k, self.heads), _split_heads(v, self.heads))
        att = _merge_heads(att, self.heads)
        att = transpose(reshape(att, (L, H, W, C)), (0, 3, 1, 2))
        return add(h, conv2d(att, self.wo.tensor, self.bo.tensor))


class TemporalAttention(Module):
    """Frames attend to each other independently at every spatial position."""

    def __init__(self, name: str, channels: int, heads: int, rng: np.random.Generator):
        super().__init__(name)
        self.channels = channels
        self.heads = heads
        self.wq = self.param("query.weight", dense_weight(rng, channels, channels))
        self.wk = self.param("key.weight", dense_weight(rng, channels, channels))
        self.wv = self.param("value.weight", dense_weight(rng, channels, channels))
        self.wo = self.param("out.weight", np.zeros((channels, channels)))
        self.bo = self.param("out.bias", np.zeros(channels))

    def __call__(self, h: Tensor) -> Tensor:
        L, C, H, W = h.shape
        tokens = reshape(transpose(h, (2, 3, 0, 1)), (H * W, L, C))
        flat = reshape(tokens, (H * W * L, C))
        q = reshape(matmul(flat, self.wq.tensor), (H * W, L, C))
        k = reshape(matmul(flat, self.wk.tensor), (H * W, L, C))
        v = reshape(matmul(flat, self.wv.tensor), (H * W, L, C))
        att = attention(_split_heads(q, self.heads), _split_heads(k, self.heads), _split_heads(v, self.heads))
        att = _merge_heads(att, self.heads)
        out = bias_add_last(matmul(reshape(att, (H * W * L, C)), self.wo.tensor), self.bo.tensor)
        out = transpose(reshape(out, (H, W, L, C)), (2, 3, 0, 1))
        return add(h, out)


class _LevelBlock(Module):
    """One resolution level's worth of processing, shared by all three paths."""

    def __init__(self, name: str, cin: int, cout: int, cfg: UNetConfig, rng: np.random.Generator):
        super().__init__(name)
        self.res = self.child(ResBlock(f"{name}.res", cin, cout, cfg.time_dim, rng))
        self.fuse = self.child(
            FusionLayer(f"{name}.fuse", cout, cfg.image_cond_channels, cfg.trajectory_cond_channels)
        )
        self.cross = self.child(CrossAttention(f"{name}.cross", cout, cfg.text_dim, cfg.heads, rng))
        self.temporal = self.child(TemporalAttention(f"{name}.temporal", cout, cfg.heads, rng))

    def __call__(self, h, temb, level_conds, text):
        s_l, g_l, m_l = level_conds
        h = self.res(h, temb)
        h = self.fuse(h, s_l, m_l, g_l)
        h = self.cross(h, text)
        return self.temporal(h)


class UNet(Module):
    """Down path, mid block, up path with skip concatenation.

    The final projection starts at zero, so a freshly built network predicts
    zero noise everywhere.
    """

    def __init__(self, name: str, cfg: UNetConfig, rng: np.random.Generator):
        super().__init__(name)
        self.cfg = cfg
        ch = cfg.channels
        self.in_w = self.param("in.weight", conv_weight(rng, ch[0], cfg.in_channels, 3))
        self.in_b = self.param("in.bias", np.zeros(ch[0]))
        self.down = []
        prev = ch[0]
        for l in range(cfg.levels):
            blk = self.child(_LevelBlock(f"{name}.down{l}", prev, ch[l], cfg, rng))
            self.down.append(blk)
            prev = ch[l]
        self.mid_res1 = self.child(ResBlock(f"{name}.mid.res1", ch[-1], ch[-1], cfg.time_dim, rng))
        self.mid = self.child(_LevelBlock(f"{name}.mid", ch[-1], ch[-1], cfg, rng))
        self.up = []
        prev = ch[-1]
        for l in reversed(range(cfg.levels)):
            cout = ch[l - 1] if l > 0 else ch[0]
            blk = self.child(_LevelBlock(f"{name}.up{l}", prev + ch[l], cout, cfg, rng))
            self.up.append(blk)  # stored deepest-first
            prev = cout
        self.out_w = self.param("out.weight", np.zeros((cfg.in_channels, ch[0], 3, 3)))
        self.out_b = self.param("out.bias", np.zeros(cfg.in_channels))

    def __call__(self, x: Tensor, t: int, pyramid: ConditionPyramid, text: TextEmbedding) -> Tensor:
        cfg = self.cfg
        if x.shape != (cfg.frames, cfg.in_channels, cfg.height, cfg.width):
            raise ShapeError(
                f"input {x.shape} does not match config "
                f"({cfg.frames}, {cfg.in_channels}, {cfg.height}, {cfg.width})"
            )
        if len(pyramid) != cfg.levels:
            raise ShapeError(f"pyramid has {len(pyramid)} levels, config wants {cfg.levels}")
        if t < 0:
            raise ShapeError(f"timestep must be >= 0, got {t}")
        temb = Tensor(sinusoidal_time_embedding(t, cfg.time_dim))
        h = conv2d(x, self.in_w.tensor, self.in_b.tensor, padding=1)
        skips = []
        for l, blk in enumerate(self.down):
            h = blk(h, temb, pyramid.level(l), text)
            skips.append(h)
            if l + 1 < cfg.levels:
                h = avg_pool2d(h, 2)
        h = self.mid_res1(h, temb)
        h = self.mid(h, temb, pyramid.level(cfg.levels - 1), text)
        for blk, l in zip(self.up, reversed(range(cfg.levels))):
            h = concat([h, skips[l]], axis=1)
            h = blk(h, temb, pyramid.level(l), text)
            if l > 0:
                h = upsample_nearest2x(h)
        return conv2d(h, self.out_w.tensor, self.out_b.tensor, padding=1)
