"""Control encoders and condition plumbing: text, first-frame image,
trajectory map, per-frame mask, random condition dropping, and the
multiscale pyramid consumed by the fusion UNet.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .optim import Parameter
from .tensor import (
    ShapeError,
    Tensor,
    add,
    attention,
    avg_pool2d,
    bias_add_last,
    concat,
    conv2d,
    embedding_lookup,
    matmul,
    reshape,
    silu,
    tile_leading,
)

PAD_TOKEN = "<pad>"
PAD_ID = 0


class ConditionError(ValueError):
    pass


# ---------------------------------------------------------------------------
# vocabulary


class Vocabulary:
    """Token list where id equals position; id 0 is reserved for padding."""

    def __init__(self, tokens):
        tokens = list(tokens)
        if not tokens or tokens[0] != PAD_TOKEN:
            raise ConditionError(f"token 0 must be {PAD_TOKEN!r}, got {tokens[:1]!r}")
        if len(set(tokens)) != len(tokens):
            raise ConditionError("vocabulary tokens must be unique")
        self.tokens = tokens
        self._ids = {tok: i for i, tok in enumerate(tokens)}

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._ids

    def id(self, token: str) -> int:
        try:
            return self._ids[token]
        except KeyError:
            raise ConditionError(f"token {token!r} not in vocabulary") from None

    def encode(self, text: str) -> list[int]:
        """Whitespace tokenization; unknown tokens are an error."""
        return [self.id(tok) for tok in text.split()]

    def encode_lenient(self, text: str) -> tuple[list[int], list[str]]:
        """Unknown tokens become PAD; the offenders are returned for warnings."""
        ids, unknown = [], []
        for tok in text.split():
            if tok in self._ids:
                ids.append(self._ids[tok])
            else:
                ids.append(PAD_ID)
                unknown.append(tok)
        return ids, unknown

    def decode(self, ids) -> str:
        words = []
        for i in ids:
            if not (0 <= int(i) < len(self.tokens)):
                raise ConditionError(f"id {i} outside vocabulary of {len(self.tokens)}")
            if int(i) != PAD_ID:
                words.append(self.tokens[int(i)])
        return " ".join(words)


def load_vocabulary(path) -> Vocabulary:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return Vocabulary([ln for ln in lines if ln != ""])


def save_vocabulary(path, vocab: Vocabulary) -> None:
    Path(path).write_text("\n".join(vocab.tokens) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# parameter-owning modules


class Module:
    """Minimal parameter container with dotted-name registration."""

    def __init__(self, name: str):
        self.name = name
        self._params: list[Parameter] = []
        self._children: list[Module] = []

    def param(self, suffix: str, array) -> Parameter:
        p = Parameter(f"{self.name}.{suffix}", Tensor(np.asarray(array, dtype=np.float64), requires_grad=True))
        self._params.append(p)
        return p

    def child(self, module: "Module") -> "Module":
        self._children.append(module)
        return module

    def parameters(self) -> list[Parameter]:
        out = list(self._params)
        for c in self._children:
            out.extend(c.parameters())
        return out

    def state_dict(self) -> dict[str, np.ndarray]:
        return {p.name: p.data.copy() for p in self.parameters()}

    def load_state_dict(self, arrays: dict[str, np.ndarray]) -> None:
        params = {p.name: p for p in self.parameters()}
        missing = sorted(set(params) - set(arrays))
        extra = sorted(set(arrays) - set(params))
        if missing or extra:
            raise ConditionError(f"state mismatch: missing {missing[:3]}, unexpected {extra[:3]}")
        for name, p in params.items():
            arr = np.asarray(arrays[name], dtype=np.float64)
            if arr.shape != p.data.shape:
                raise ConditionError(f"{name}: shape {arr.shape} != expected {p.data.shape}")
            p.data = arr.copy()


def conv_weight(rng: np.random.Generator, cout: int, cin: int, k: int) -> np.ndarray:
    fan_in = cin * k * k
    return rng.normal(0.0, math.sqrt(1.0 / fan_in), size=(cout, cin, k, k))


def dense_weight(rng: np.random.Generator, din: int, dout: int) -> np.ndarray:
    return rng.normal(0.0, math.sqrt(1.0 / din), size=(din, dout))


# ---------------------------------------------------------------------------
# text encoder


@dataclass
class TextEmbedding:
    """Encoded caption: (length, dim) tensor plus the padded token ids."""

    value: Tensor
    tokens: tuple[int, ...]

    @property
    def length(self) -> int:
        return self.value.shape[0]

    @property
    def dim(self) -> int:
        return self.value.shape[1]


class TextEncoder(Module):
    """Token + position embedding table with a two-layer mixer: one
    self-attention pass over the tokens, then a gated MLP, both residual."""

    def __init__(self, name: str, vocab_size: int, length: int, dim: int, rng: np.random.Generator):
        super().__init__(name)
        if length < 1 or dim < 1 or vocab_size < 1:
            raise ConditionError(f"bad text encoder dims ({vocab_size}, {length}, {dim})")
        self.vocab_size = vocab_size
        self.length = length
        self.dim = dim
        self.table = self.param("table", rng.normal(0.0, 0.02, (vocab_size, dim)))
        self.positions = self.param("positions", rng.normal(0.0, 0.02, (length, dim)))
        self.wq = self.param("wq", dense_weight(rng, dim, dim))
        self.wk = self.param("wk", dense_weight(rng, dim, dim))
        self.wv = self.param("wv", dense_weight(rng, dim, dim))
        self.wo = self.param("wo", dense_weight(rng, dim, dim))
        self.w1 = self.param("w1", dense_weight(rng, dim, 2 * dim))
        self.b1 = self.param("b1", np.zeros(2 * dim))
        self.w2 = self.param("w2", dense_weight(rng, 2 * dim, dim))
        self.b2 = self.param("b2", np.zeros(dim))

    def pad_ids(self, ids) -> tuple[int, ...]:
        """Truncate or right-pad with PAD to the fixed caption length."""
        ids = [int(i) for i in ids][: self.length]
        return tuple(ids + [PAD_ID] * (self.length - len(ids)))

    def embed_tokens(self, ids) -> Tensor:
        """Pure lookup + positional rows, before any mixing."""
        padded = self.pad_ids(ids)
        return add(embedding_lookup(self.table.tensor, padded), self.positions.tensor)

    def encode(self, ids) -> TextEmbedding:
        padded = self.pad_ids(ids)
        h = self.embed_tokens(padded)
        q = reshape(matmul(h, self.wq.tensor), (1, self.length, self.dim))
        k = reshape(matmul(h, self.wk.tensor), (1, self.length, self.dim))
        v = reshape(matmul(h, self.wv.tensor), (1, self.length, self.dim))
        mixed = reshape(attention(q, k, v), (self.length, self.dim))
        h = add(h, matmul(mixed, self.wo.tensor))
        hidden = silu(bias_add_last(matmul(h, self.w1.tensor), self.b1.tensor))
        h = add(h, bias_add_last(matmul(hidden, self.w2.tensor), self.b2.tensor))
        return TextEmbedding(value=h, tokens=padded)


# ---------------------------------------------------------------------------
# frame encoders (image condition and trajectory condition share this)


class FrameEncoder(Module):
    """Per-frame conv stack: 3x3 stem, optional stride-2 stages, 3x3 head.

    All biases start at zero so an all-zero input maps to an all-zero code.
    """

    def __init__(
        self,
        name: str,
        in_channels: int,
        hidden: int,
        out_channels: int,
        stride2_stages: int,
        rng: np.random.Generator,
    ):
        super().__init__(name)
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.stride2_stages = stride2_stages
        self.stem_w = self.param("stem.weight", conv_weight(rng, hidden, in_channels, 3))
        self.stem_b = self.param("stem.bias", np.zeros(hidden))
        self.stage_ws = [
            self.param(f"stage{i}.weight", conv_weight(rng, hidden, hidden, 3))
            for i in range(stride2_stages)
        ]
        self.stage_bs = [self.param(f"stage{i}.bias", np.zeros(hidden)) for i in range(stride2_stages)]
        self.head_w = self.param("head.weight", conv_weight(rng, out_channels, hidden, 3))
        self.head_b = self.param("head.bias", np.zeros(out_channels))

    def __call__(self, x: Tensor) -> Tensor:
        if x.data.ndim != 4 or x.data.shape[1] != self.in_channels:
            raise ShapeError(
                f"{self.name}: expected (L, {self.in_channels}, H, W), got {x.shape}"
            )
        h = silu(conv2d(x, self.stem_w.tensor, self.stem_b.tensor, padding=1))
        for w, b in zip(self.stage_ws, self.stage_bs):
            h = silu(conv2d(h, w.tensor, b.tensor, stride=2, padding=1))
        return conv2d(h, self.head_w.tensor, self.head_b.tensor, padding=1)


def encode_image_condition(first_frame, frames: int, encoder: FrameEncoder) -> Tensor:
    """Repeat the first frame across the video length, then encode per frame."""
    if frames < 1:
        raise ConditionError(f"frames must be >= 1, got {frames}")
    if not isinstance(first_frame, Tensor):
        first_frame = Tensor(np.asarray(first_frame, dtype=np.float64))
    if first_frame.data.ndim != 3:
        raise ShapeError(f"first frame must be (C, H, W), got {first_frame.shape}")
    stacked = tile_leading(first_frame, frames)
    return encoder(stacked)


def encode_trajectory_condition(trajectory_map, encoder: FrameEncoder) -> Tensor:
    """Prepend one all-zero frame (the map has L-1 frames), then encode."""
    grid = trajectory_map.grid if hasattr(trajectory_map, "grid") else trajectory_map
    if not isinstance(grid, Tensor):
        grid = Tensor(np.asarray(grid, dtype=np.float64))
    if grid.data.ndim != 4:
        raise ShapeError(f"trajectory map must be (L-1, C, H, W), got {grid.shape}")
    zero = Tensor(np.zeros((1,) + grid.shape[1:], dtype=np.float64))
    padded = concat([zero, grid], axis=0)
    return encoder(padded)


def first_frame_mask(frames: int) -> np.ndarray:
    """Indicator of which frames carry the image condition: the first only."""
    m = np.zeros(frames, dtype=np.float64)
    m[0] = 1.0
    return m


# ---------------------------------------------------------------------------
# condition set and dropping


@dataclass
class ConditionSet:
    text: TextEmbedding
    image: Tensor  # (L, c_s, h, w)
    trajectory: Tensor  # (L, c_g, h, w)
    mask: np.ndarray  # (L,) binary per-frame indicator
    dropped_text: bool = False
    dropped_image: bool = False
    dropped_trajectory: bool = False

    def __post_init__(self):
        if self.image.data.ndim != 4 or self.trajectory.data.ndim != 4:
            raise ShapeError("image and trajectory conditions must be (L, C, h, w)")
        L = self.image.shape[0]
        if self.trajectory.shape[0] != L or self.mask.shape != (L,):
            raise ShapeError(
                f"frame counts disagree: image {self.image.shape[0]}, "
                f"trajectory {self.trajectory.shape[0]}, mask {self.mask.shape}"
            )


@dataclass(frozen=True)
class DropRatios:
    text: float = 0.1
    image: float = 0.1
    trajectory: float = 0.1

    def __post_init__(self):
        for nm in ("text", "image", "trajectory"):
            v = getattr(self, nm)
            if not (0.0 <= v <= 1.0):
                raise ConditionError(f"drop ratio {nm}={v} outside [0, 1]")


def drop_conditions(
    conds: ConditionSet,
    ratios: DropRatios,
    rng: np.random.Generator,
    null_text: TextEmbedding,
) -> ConditionSet:
    """Independently replace each control with its null at the given rates.

    Draw order is text, image, trajectory (stable for seeded reproduction).
    The frame mask travels with the image: dropping the image zeroes it too,
    since the mask asserts "this frame is conditioned".
    """
    drop_text = bool(rng.random() < ratios.text)
    drop_image = bool(rng.random() < ratios.image)
    drop_traj = bool(rng.random() < ratios.trajectory)
    text = null_text if drop_text else conds.text
    if drop_image:
        image = Tensor(np.zeros(conds.image.shape, dtype=np.float64))
        mask = np.zeros_like(conds.mask)
    else:
        image = conds.image
        mask = conds.mask
    trajectory = (
        Tensor(np.zeros(conds.trajectory.shape, dtype=np.float64))
        if drop_traj
        else conds.trajectory
    )
    return ConditionSet(
        text=text,
        image=image,
        trajectory=trajectory,
        mask=mask,
        dropped_text=drop_text,
        dropped_image=drop_image,
        dropped_trajectory=drop_traj,
    )


# ---------------------------------------------------------------------------
# multiscale pyramid


@dataclass
class ConditionPyramid:
    """Per-level (image, trajectory, mask-map) tensors, halving spatially."""

    levels: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.levels)

    def level(self, l: int):
        return self.levels[l]


def build_pyramid(image: Tensor, trajectory: Tensor, mask: np.ndarray, depths: int) -> ConditionPyramid:
    """Level 0 holds the inputs; each deeper level 2x2 average-pools the last.

    The per-frame mask becomes a one-channel constant map at matching
    resolution per level so fusion can project it like the other controls.
    """
    if depths < 1:
        raise ConditionError(f"depths must be >= 1, got {depths}")
    L, _, h, w = image.shape
    factor = 2 ** (depths - 1)
    if h % factor or w % factor:
        raise ShapeError(f"spatial dims {h}x{w} not divisible by 2^{depths - 1}")
    if trajectory.shape[0] != L or trajectory.shape[2:] != (h, w):
        raise ShapeError(
            f"trajectory condition {trajectory.shape} does not match image {image.shape}"
        )
    levels = []
    s_l, g_l = image, trajectory
    for l in range(depths):
        hl, wl = h >> l, w >> l
        m_l = Tensor(np.broadcast_to(mask[:, None, None, None], (L, 1, hl, wl)).copy())
        levels.append((s_l, g_l, m_l))
        if l + 1 < depths:
            s_l = avg_pool2d(s_l, 2)
            g_l = avg_pool2d(g_l, 2)
    return ConditionPyramid(levels=levels)
