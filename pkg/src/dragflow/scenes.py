"""Moving-sprite scene descriptions and rasterization.

Coordinates: origin top-left, x rightward, y downward; a pixel (row i, col j)
is sampled at its center (x=j, y=i). Sprites translate rigidly along their
motion path, so the displacement of every covered pixel equals the sprite's
per-frame displacement.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

# color id -> (name, rgb in [0,1]); id 0 is the default background
PALETTE = (
    ("black", (0.0, 0.0, 0.0)),
    ("red", (0.9, 0.1, 0.1)),
    ("green", (0.1, 0.8, 0.15)),
    ("blue", (0.15, 0.25, 0.95)),
    ("yellow", (0.95, 0.85, 0.1)),
    ("magenta", (0.85, 0.1, 0.8)),
    ("cyan", (0.1, 0.8, 0.85)),
)

SHAPES = ("circle", "square", "triangle")


def color_name(color_id: int) -> str:
    return PALETTE[color_id][0]


def color_rgb(color_id: int) -> tuple[float, float, float]:
    return PALETTE[color_id][1]


class SceneError(ValueError):
    pass


@dataclass(frozen=True)
class LinearMotion:
    velocity: tuple[float, float]  # (vx, vy) pixels per frame

    kind = "linear"


@dataclass(frozen=True)
class CircularMotion:
    center: tuple[float, float]
    omega: float  # radians per frame; radius/phase come from the start position

    kind = "circular"


@dataclass(frozen=True)
class PolylineMotion:
    points: tuple[tuple[float, float], ...]  # resampled by arc length over the frames

    kind = "polyline"


Motion = Union[LinearMotion, CircularMotion, PolylineMotion]


@dataclass(frozen=True)
class SpriteSpec:
    shape: str  # circle | square | triangle
    color: int  # palette id
    size: float  # diameter / side length in pixels, >= 3
    start: tuple[float, float]
    motion: Motion


@dataclass
class SceneSpec:
    width: int
    height: int
    frames: int
    sprites: list[SpriteSpec] = field(default_factory=list)
    background: int = 0
    seed: int | None = None

    def validate(self) -> None:
        if self.frames < 2:
            raise SceneError(f"scene needs at least 2 frames, got {self.frames}")
        if self.width < 4 or self.height < 4:
            raise SceneError(f"canvas {self.width}x{self.height} too small")
        for k, s in enumerate(self.sprites):
            if s.shape not in SHAPES:
                raise SceneError(f"sprite {k}: unknown shape {s.shape!r}")
            if not (0 <= s.color < len(PALETTE)):
                raise SceneError(f"sprite {k}: color id {s.color} outside palette")
            if s.size < 3:
                raise SceneError(f"sprite {k}: size {s.size} below 3 px minimum")


def sprite_path(sprite: SpriteSpec, frames: int) -> np.ndarray:
    """(frames, 2) array of center positions, one per frame.

    Positions may leave the canvas; rasterization clips.
    """
    m = sprite.motion
    ts = np.arange(frames, dtype=np.float64)
    if isinstance(m, LinearMotion):
        return np.stack([sprite.start[0] + ts * m.velocity[0], sprite.start[1] + ts * m.velocity[1]], axis=1)
    if isinstance(m, CircularMotion):
        dx = sprite.start[0] - m.center[0]
        dy = sprite.start[1] - m.center[1]
        r = math.hypot(dx, dy)
        phase = math.atan2(dy, dx)
        a = phase + ts * m.omega
        return np.stack([m.center[0] + r * np.cos(a), m.center[1] + r * np.sin(a)], axis=1)
    if isinstance(m, PolylineMotion):
        from .trajectory import resample_polyline  # local import: trajectory also imports flow types

        return resample_polyline(np.asarray(m.points, dtype=np.float64), frames)
    raise SceneError(f"unknown motion {m!r}")


def coverage_mask(shape: str, center: tuple[float, float], size: float, height: int, width: int) -> np.ndarray:
    """Boolean (H, W) mask of pixels whose centers fall inside the sprite."""
    ys, xs = np.mgrid[0:height, 0:width]
    cx, cy = center
    r = size / 2.0
    if shape == "circle":
        return (xs - cx) ** 2 + (ys - cy) ** 2 <= r * r
    if shape == "square":
        return (np.abs(xs - cx) <= r) & (np.abs(ys - cy) <= r)
    if shape == "triangle":
        # upward-pointing triangle: apex (cx, cy-r), base corners (cx +- r, cy+r)
        inside = ys - cy <= r
        # left edge from apex to (cx-r, cy+r): x >= cx - r*(y-(cy-r))/(2r)
        s = (ys - (cy - r)) / 2.0
        inside &= xs - cx >= -s
        inside &= xs - cx <= s
        inside &= ys - cy >= -r
        return inside
    raise SceneError(f"unknown shape {shape!r}")


def occupancy(spec: SceneSpec, t: int) -> np.ndarray:
    """(H, W) int map of the topmost sprite index at frame t, -1 for background.

    Sprites later in the list draw over earlier ones.
    """
    top = np.full((spec.height, spec.width), -1, dtype=np.int64)
    for k, s in enumerate(spec.sprites):
        pos = sprite_path(s, spec.frames)[t]
        top[coverage_mask(s.shape, (pos[0], pos[1]), s.size, spec.height, spec.width)] = k
    return top


def render_scene(spec: SceneSpec) -> np.ndarray:
    """Rasterize to (L, 3, H, W) float64 frames in [0, 1], painter's order."""
    spec.validate()
    frames = np.empty((spec.frames, 3, spec.height, spec.width), dtype=np.float64)
    bg = np.array(color_rgb(spec.background), dtype=np.float64)
    paths = [sprite_path(s, spec.frames) for s in spec.sprites]
    for t in range(spec.frames):
        img = np.tile(bg[:, None, None], (1, spec.height, spec.width))
        for s, path in zip(spec.sprites, paths):
            mask = coverage_mask(s.shape, (path[t, 0], path[t, 1]), s.size, spec.height, spec.width)
            rgb = color_rgb(s.color)
            for c in range(3):
                img[c][mask] = rgb[c]
        frames[t] = img
    return frames


# ---------------------------------------------------------------------------
# JSON round-trip for scene specs


def scene_to_dict(spec: SceneSpec) -> dict:
    def motion_dict(m: Motion) -> dict:
        if isinstance(m, LinearMotion):
            return {"kind": "linear", "velocity": list(m.velocity)}
        if isinstance(m, CircularMotion):
            return {"kind": "circular", "center": list(m.center), "omega": m.omega}
        return {"kind": "polyline", "points": [list(p) for p in m.points]}

    return {
        "width": spec.width,
        "height": spec.height,
        "frames": spec.frames,
        "background": spec.background,
        "seed": spec.seed,
        "sprites": [
            {
                "shape": s.shape,
                "color": s.color,
                "size": s.size,
                "start": list(s.start),
                "motion": motion_dict(s.motion),
            }
            for s in spec.sprites
        ],
    }


def scene_from_dict(d: dict) -> SceneSpec:
    def motion_from(md: dict) -> Motion:
        kind = md.get("kind")
        if kind == "linear":
            return LinearMotion(velocity=tuple(md["velocity"]))
        if kind == "circular":
            return CircularMotion(center=tuple(md["center"]), omega=float(md["omega"]))
        if kind == "polyline":
            return PolylineMotion(points=tuple(tuple(p) for p in md["points"]))
        raise SceneError(f"unknown motion kind {kind!r}")

    spec = SceneSpec(
        width=int(d["width"]),
        height=int(d["height"]),
        frames=int(d["frames"]),
        background=int(d.get("background", 0)),
        seed=d.get("seed"),
        sprites=[
            SpriteSpec(
                shape=sd["shape"],
                color=int(sd["color"]),
                size=float(sd["size"]),
                start=tuple(sd["start"]),
                motion=motion_from(sd["motion"]),
            )
            for sd in d.get("sprites", [])
        ],
    )
    spec.validate()
    return spec


def save_scene(path, spec: SceneSpec) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(scene_to_dict(spec), f, indent=2, sort_keys=True)


def load_scene(path) -> SceneSpec:
    with open(path, encoding="utf-8") as f:
        return scene_from_dict(json.load(f))
