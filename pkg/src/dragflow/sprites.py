"""Synthetic training data: moving-sprite videos with captions and exact
analytic flow, streamed in reproducible batches.

Captions come from a closed grammar, one clause per sprite joined by "and":
"<color> <shape> moves <right|left|up|down|around>" or "<color> <shape>
stays". Every emitted word is in the default vocabulary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .conditions import PAD_TOKEN, Vocabulary
from .flow import FlowField, synthetic_flow
from .scenes import (
    PALETTE,
    SHAPES,
    CircularMotion,
    LinearMotion,
    PolylineMotion,
    SceneError,
    SceneSpec,
    SpriteSpec,
    color_name,
    render_scene,
    sprite_path,
)

DIRECTIONS = ("right", "left", "up", "down", "around", "stays")

# below this many pixels of net movement a sprite is described as staying put
_STILL_EPS = 0.5


@dataclass
class VideoSample:
    pixels: np.ndarray  # (L, 3, H, W) in [0, 1]
    caption: str
    tokens: list[str]
    flow: FlowField
    scene: SceneSpec


# ---------------------------------------------------------------------------
# captions


def sprite_direction(sprite: SpriteSpec, frames: int) -> str:
    """Dominant-axis motion word for one sprite over the clip."""
    path = sprite_path(sprite, frames)
    deltas = path - path[0]
    if float(np.max(np.abs(deltas))) < _STILL_EPS:
        return "stays"
    if sprite.motion.kind == "circular":
        return "around"
    net = path[-1] - path[0]
    if float(np.hypot(*net)) < _STILL_EPS:
        # moves but returns to start: closest grammar word is "around"
        return "around"
    dx, dy = float(net[0]), float(net[1])
    if abs(dx) >= abs(dy):
        return "right" if dx > 0 else "left"
    return "down" if dy > 0 else "up"


def sprite_clause(sprite: SpriteSpec, frames: int) -> str:
    direction = sprite_direction(sprite, frames)
    head = f"{color_name(sprite.color)} {sprite.shape}"
    if direction == "stays":
        return f"{head} stays"
    return f"{head} moves {direction}"


def scene_caption(spec: SceneSpec) -> str:
    if not spec.sprites:
        raise SceneError("cannot caption a scene with no sprites")
    return " and ".join(sprite_clause(s, spec.frames) for s in spec.sprites)


def default_vocab() -> Vocabulary:
    tokens = [PAD_TOKEN]
    tokens += [name for name, _ in PALETTE[1:]]
    tokens += list(SHAPES)
    tokens += ["moves", "stays", "and"]
    tokens += ["right", "left", "up", "down", "around"]
    return Vocabulary(tokens)


# ---------------------------------------------------------------------------
# sample generation


def generate_scene(spec: SceneSpec) -> VideoSample:
    spec.validate()
    caption = scene_caption(spec)
    return VideoSample(
        pixels=render_scene(spec),
        caption=caption,
        tokens=caption.split(),
        flow=synthetic_flow(spec),
        scene=spec,
    )


@dataclass(frozen=True)
class DatasetConfig:
    width: int = 32
    height: int = 32
    frames: int = 8
    batch_size: int = 1
    min_sprites: int = 1
    max_sprites: int = 3
    min_size: float = 5.0
    max_size: float = 11.0
    min_speed: float = 0.5
    max_speed: float = 2.5

    def __post_init__(self):
        if self.batch_size < 1:
            raise SceneError(f"batch_size must be >= 1, got {self.batch_size}")
        if not (1 <= self.min_sprites <= self.max_sprites):
            raise SceneError(
                f"bad sprite count bounds ({self.min_sprites}, {self.max_sprites})"
            )
        if self.min_size < 3 or self.min_size > self.max_size:
            raise SceneError(f"bad size bounds ({self.min_size}, {self.max_size})")
        if not (0 < self.min_speed <= self.max_speed):
            raise SceneError(f"bad speed bounds ({self.min_speed}, {self.max_speed})")
        if self.frames < 2:
            raise SceneError(f"frames must be >= 2, got {self.frames}")


def _clip_point(x: float, y: float, size: float, cfg: DatasetConfig) -> tuple[float, float]:
    return (
        float(np.clip(x, size / 2, cfg.width - size / 2)),
        float(np.clip(y, size / 2, cfg.height - size / 2)),
    )


def _random_sprite(rng: np.random.Generator, cfg: DatasetConfig) -> SpriteSpec:
    shape = SHAPES[int(rng.integers(0, len(SHAPES)))]
    color = int(rng.integers(1, len(PALETTE)))
    size = float(rng.uniform(cfg.min_size, cfg.max_size))
    x = float(rng.uniform(size / 2, cfg.width - size / 2))
    y = float(rng.uniform(size / 2, cfg.height - size / 2))
    kind = int(rng.integers(0, 3))
    if kind == 0:
        speed = float(rng.uniform(cfg.min_speed, cfg.max_speed))
        theta = float(rng.uniform(0.0, 2.0 * math.pi))
        motion = LinearMotion(velocity=(speed * math.cos(theta), speed * math.sin(theta)))
    elif kind == 1:
        radius = float(rng.uniform(2.0, 6.0))
        phi = float(rng.uniform(0.0, 2.0 * math.pi))
        center = (x + radius * math.cos(phi), y + radius * math.sin(phi))
        omega = float(rng.uniform(0.15, 0.5)) * (1.0 if rng.random() < 0.5 else -1.0)
        motion = CircularMotion(center=center, omega=omega)
    else:
        points = [(x, y)]
        px, py = x, y
        for _ in range(2):
            step = float(rng.uniform(cfg.min_speed, cfg.max_speed)) * cfg.frames / 2.0
            theta = float(rng.uniform(0.0, 2.0 * math.pi))
            px, py = _clip_point(px + step * math.cos(theta), py + step * math.sin(theta), size, cfg)
            points.append((px, py))
        motion = PolylineMotion(points=tuple(points))
    return SpriteSpec(shape=shape, color=color, size=size, start=(x, y), motion=motion)


def random_scene(rng: np.random.Generator, cfg: DatasetConfig) -> SceneSpec:
    n = int(rng.integers(cfg.min_sprites, cfg.max_sprites + 1))
    sprites = [_random_sprite(rng, cfg) for _ in range(n)]
    return SceneSpec(
        width=cfg.width, height=cfg.height, frames=cfg.frames, sprites=sprites
    )


def dataset_stream(cfg: DatasetConfig, seed: int):
    """Infinite iterator of batches; batch i depends only on (seed, i)."""
    index = 0
    while True:
        rng = np.random.default_rng([int(seed), index])
        yield [generate_scene(random_scene(rng, cfg)) for _ in range(cfg.batch_size)]
        index += 1
