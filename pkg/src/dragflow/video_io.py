"""Video frame directories: frame_%04d.png files plus a meta.json carrying
the seed, guidance, schedule, and condition hashes of a generation run."""

from __future__ import annotations

import hashlib
import json
import re
from pathlib import Path

import numpy as np
from PIL import Image

FRAME_PATTERN = "frame_%04d.png"
_FRAME_RE = re.compile(r"^frame_(\d{4})\.png$")


class VideoIOError(ValueError):
    pass


def frame_to_uint8(frame: np.ndarray) -> np.ndarray:
    frame = np.asarray(frame, dtype=np.float64)
    if frame.ndim != 3 or frame.shape[0] != 3:
        raise VideoIOError(f"frame must be (3, H, W), got {frame.shape}")
    return (np.clip(frame, 0.0, 1.0) * 255.0).round().astype(np.uint8)


def save_frame_png(path, frame: np.ndarray) -> None:
    rgb = frame_to_uint8(frame)
    Image.fromarray(rgb.transpose(1, 2, 0), "RGB").save(path, "PNG")


def load_frame_png(path) -> np.ndarray:
    with Image.open(path) as img:
        rgb = np.asarray(img.convert("RGB"), dtype=np.float64)
    return rgb.transpose(2, 0, 1) / 255.0


def write_video_dir(directory, frames: np.ndarray) -> list[Path]:
    """Write (L, 3, H, W) float frames as frame_0000.png .. frame_{L-1}.png."""
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 4 or frames.shape[1] != 3:
        raise VideoIOError(f"frames must be (L, 3, H, W), got {frames.shape}")
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for t in range(frames.shape[0]):
        p = directory / (FRAME_PATTERN % t)
        save_frame_png(p, frames[t])
        paths.append(p)
    return paths


def read_video_dir(directory) -> np.ndarray:
    directory = Path(directory)
    entries = []
    for p in directory.iterdir() if directory.is_dir() else []:
        m = _FRAME_RE.match(p.name)
        if m:
            entries.append((int(m.group(1)), p))
    if not entries:
        raise VideoIOError(f"no frame_*.png files in {directory}")
    entries.sort()
    frames = [load_frame_png(p) for _, p in entries]
    shapes = {f.shape for f in frames}
    if len(shapes) != 1:
        raise VideoIOError(f"inconsistent frame shapes in {directory}: {sorted(shapes)}")
    return np.stack(frames)


# ---------------------------------------------------------------------------
# generation metadata


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def condition_hashes(first_frame: np.ndarray, motion: np.ndarray, caption: str) -> dict:
    """Stable digests of the raw conditioning inputs for provenance checks."""
    return {
        "image": _sha256(np.ascontiguousarray(np.asarray(first_frame, dtype=np.float64)).tobytes()),
        "trajectory": _sha256(np.ascontiguousarray(np.asarray(motion, dtype=np.float64)).tobytes()),
        "text": _sha256(caption.encode("utf-8")),
    }


def write_meta(directory, seed: int, guidance: float, schedule: dict, conditions: dict) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    meta = {
        "seed": int(seed),
        "guidance": float(guidance),
        "schedule": schedule,
        "conditions": conditions,
    }
    path = directory / "meta.json"
    path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def read_meta(directory) -> dict:
    path = Path(directory) / "meta.json"
    if not path.exists():
        raise VideoIOError(f"missing meta.json in {directory}")
    return json.loads(path.read_text(encoding="utf-8"))
