"""Dense optical flow: representation, .flo binary I/O, analytic sprite flow.

A flow frame stores per-pixel (u, v) displacement in pixels/frame, u positive
rightward and v positive downward, matching the .flo ecosystem convention.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .scenes import SceneSpec, occupancy, sprite_path

FLO_MAGIC = 202021.25


class FormatError(ValueError):
    pass


@dataclass
class FlowFrame:
    """One H x W grid of (u, v); stored as float64 array of shape (2, H, W)."""

    uv: np.ndarray

    def __post_init__(self):
        self.uv = np.asarray(self.uv, dtype=np.float64)
        if self.uv.ndim != 3 or self.uv.shape[0] != 2:
            raise FormatError(f"flow frame must be (2, H, W), got {self.uv.shape}")

    @property
    def height(self) -> int:
        return self.uv.shape[1]

    @property
    def width(self) -> int:
        return self.uv.shape[2]


@dataclass
class FlowField:
    """Per-frame dense flow for a video of L frames: L-1 flow frames."""

    frames: np.ndarray  # (L-1, 2, H, W)

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)
        if self.frames.ndim != 4 or self.frames.shape[1] != 2:
            raise FormatError(f"flow field must be (L-1, 2, H, W), got {self.frames.shape}")

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def height(self) -> int:
        return self.frames.shape[2]

    @property
    def width(self) -> int:
        return self.frames.shape[3]

    def frame(self, t: int) -> FlowFrame:
        return FlowFrame(self.frames[t])


def read_flo(payload: bytes) -> FlowFrame:
    """Parse one Middlebury-style .flo payload into a float64 FlowFrame."""
    if len(payload) < 12:
        raise FormatError(f"truncated .flo header: {len(payload)} bytes, need 12")
    (magic,) = struct.unpack_from("<f", payload, 0)
    if magic != np.float32(FLO_MAGIC):
        raise FormatError(f"bad .flo magic {magic!r}, expected {FLO_MAGIC}")
    width, height = struct.unpack_from("<ii", payload, 4)
    if width <= 0 or height <= 0:
        raise FormatError(f"bad .flo dimensions {width}x{height}")
    need = 12 + 8 * width * height
    if len(payload) < need:
        raise FormatError(f"truncated .flo payload at byte {len(payload)}, need {need}")
    flat = np.frombuffer(payload, dtype="<f4", count=2 * width * height, offset=12)
    uv = flat.reshape(height, width, 2).transpose(2, 0, 1)
    return FlowFrame(uv.astype(np.float64))


def write_flo(frame: FlowFrame) -> bytes:
    """Serialize a FlowFrame to .flo bytes (float64 narrowed to float32)."""
    if not np.isfinite(frame.uv).all():
        raise FormatError("flow frame has non-finite values")
    h, w = frame.height, frame.width
    head = struct.pack("<fii", FLO_MAGIC, w, h)
    interleaved = frame.uv.transpose(1, 2, 0).astype("<f4")
    return head + interleaved.tobytes()


def read_flo_file(path) -> FlowFrame:
    return read_flo(Path(path).read_bytes())


def write_flo_file(path, frame: FlowFrame) -> None:
    Path(path).write_bytes(write_flo(frame))


def read_flow_dir(path) -> FlowField:
    """Load a directory of frame_%04d.flo files into a FlowField."""
    files = sorted(Path(path).glob("frame_*.flo"))
    if not files:
        raise FormatError(f"no frame_*.flo files in {path}")
    frames = [read_flo_file(f).uv for f in files]
    return FlowField(np.stack(frames))


def write_flow_dir(path, field: FlowField) -> None:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    for t in range(field.num_frames):
        write_flo_file(p / f"frame_{t:04d}.flo", field.frame(t))


def flow_magnitude(frame: FlowFrame) -> np.ndarray:
    """Per-pixel Euclidean norm of (u, v), shape (H, W)."""
    return np.sqrt(frame.uv[0] ** 2 + frame.uv[1] ** 2)


def synthetic_flow(scene: SceneSpec) -> FlowField:
    """Analytic ground-truth flow of a sprite scene.

    At every pixel covered by a sprite in frame t the flow is that sprite's
    frame-t displacement; background pixels are zero; overlaps carry the
    topmost (last-drawn) sprite's displacement.
    """
    scene.validate()
    L = scene.frames
    flows = np.zeros((L - 1, 2, scene.height, scene.width), dtype=np.float64)
    paths = [sprite_path(s, L) for s in scene.sprites]
    for t in range(L - 1):
        top = occupancy(scene, t)
        for k, path in enumerate(paths):
            mask = top == k
            if not mask.any():
                continue
            d = path[t + 1] - path[t]
            flows[t, 0][mask] = d[0]
            flows[t, 1][mask] = d[1]
    return FlowField(flows)
