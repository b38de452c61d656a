"""Evaluation: color-keyed centroid tracking, trajectory deviation scores,
and PSNR, plus a JSON report and an optional path-overlay PNG.

Tracking finds pixels within an L-inf color tolerance of a palette color and
takes their intensity-weighted centroid per frame; flat-colored sprites make
this reliable without a learned tracker.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .scenes import color_rgb
from .trajectory import resample_polyline

COLOR_TOLERANCE = 0.15
PSNR_CAP = 99.0


class MetricsError(ValueError):
    pass


# ---------------------------------------------------------------------------
# centroid tracking


def centroid_track(frames: np.ndarray, color: int) -> np.ndarray:
    """Per-frame (x, y) centroid of pixels matching the palette color.

    Returns an (L, 2) array; frames with no matching pixel get NaN rows.
    Raises if the color is absent from every frame.
    """
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 4 or frames.shape[1] != 3:
        raise MetricsError(f"frames must be (L, 3, H, W), got {frames.shape}")
    target = np.asarray(color_rgb(color), dtype=np.float64)
    L, _, H, W = frames.shape
    xs = np.arange(W, dtype=np.float64)
    ys = np.arange(H, dtype=np.float64)
    out = np.full((L, 2), np.nan)
    for t in range(L):
        err = np.abs(frames[t] - target[:, None, None]).max(axis=0)
        mask = err <= COLOR_TOLERANCE
        if not mask.any():
            continue
        weights = frames[t].mean(axis=0) * mask
        total = float(weights.sum())
        if total <= 0.0:
            # tolerance matched only zero-intensity pixels; fall back to counts
            weights = mask.astype(np.float64)
            total = float(weights.sum())
        out[t, 0] = float((weights * xs[None, :]).sum()) / total
        out[t, 1] = float((weights * ys[:, None]).sum()) / total
    if np.isnan(out[:, 0]).all():
        raise MetricsError(f"color id {color} absent from every frame")
    return out


# ---------------------------------------------------------------------------
# trajectory deviation


@dataclass(frozen=True)
class TrajectoryScore:
    per_frame: np.ndarray  # (L,) pixel deviations, NaN where tracking missed
    mean_px: float
    max_px: float


def trajectory_error(tracked: np.ndarray, target: np.ndarray) -> TrajectoryScore:
    """Euclidean deviation per frame after arc-length resampling the target
    path to the tracked length. Missing (NaN) tracked frames are skipped."""
    tracked = np.asarray(tracked, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if tracked.ndim != 2 or tracked.shape[1] != 2:
        raise MetricsError(f"tracked path must be (L, 2), got {tracked.shape}")
    if target.ndim != 2 or target.shape[1] != 2:
        raise MetricsError(f"target path must be (M, 2), got {target.shape}")
    L = tracked.shape[0]
    resampled = resample_polyline(target, L)
    if resampled.shape != tracked.shape:
        raise MetricsError(
            f"resampled target {resampled.shape} != tracked {tracked.shape}"
        )
    per_frame = np.hypot(*(tracked - resampled).T)
    valid = ~np.isnan(per_frame)
    if not valid.any():
        raise MetricsError("no valid tracked frames to score")
    return TrajectoryScore(
        per_frame=per_frame,
        mean_px=float(per_frame[valid].mean()),
        max_px=float(per_frame[valid].max()),
    )


# ---------------------------------------------------------------------------
# reconstruction quality


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """10*log10(1/MSE) for [0,1]-ranged frames, capped at 99 dB."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise MetricsError(f"shape mismatch: {a.shape} vs {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * math.log10(1.0 / mse))


# ---------------------------------------------------------------------------
# reporting


def evaluate_sample(generated: np.ndarray, target_path: np.ndarray, color: int,
                    reference: np.ndarray | None = None) -> dict:
    tracked = centroid_track(generated, color)
    score = trajectory_error(tracked, target_path)
    entry = {"mean_px": score.mean_px, "max_px": score.max_px}
    entry["psnr"] = psnr(generated, reference) if reference is not None else None
    return entry


def evaluation_report(per_sample: list[dict]) -> dict:
    if not per_sample:
        raise MetricsError("no samples to aggregate")
    means = [s["mean_px"] for s in per_sample]
    maxes = [s["max_px"] for s in per_sample]
    psnrs = [s["psnr"] for s in per_sample if s.get("psnr") is not None]
    aggregate = {
        "mean_px": float(np.mean(means)),
        "max_px": float(np.max(maxes)),
        "psnr": float(np.mean(psnrs)) if psnrs else None,
        "samples": len(per_sample),
    }
    return {"per_sample": per_sample, "aggregate": aggregate}


def write_report(path, report: dict) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def save_overlay_png(path, frame: np.ndarray, tracked: np.ndarray,
                     target: np.ndarray, scale: int = 8) -> None:
    """Draw tracked (solid) and target (outline) paths over one frame."""
    from PIL import Image, ImageDraw

    frame = np.asarray(frame, dtype=np.float64)
    if frame.ndim != 3 or frame.shape[0] != 3:
        raise MetricsError(f"frame must be (3, H, W), got {frame.shape}")
    rgb = (np.clip(frame, 0.0, 1.0) * 255.0).round().astype(np.uint8)
    img = Image.fromarray(rgb.transpose(1, 2, 0), "RGB").resize(
        (frame.shape[2] * scale, frame.shape[1] * scale), Image.NEAREST
    )
    draw = ImageDraw.Draw(img)

    def path_points(path):
        pts = []
        for x, y in np.asarray(path, dtype=np.float64):
            if np.isnan(x) or np.isnan(y):
                continue
            pts.append(((x + 0.5) * scale, (y + 0.5) * scale))
        return pts

    tgt = path_points(target)
    if len(tgt) >= 2:
        draw.line(tgt, fill=(255, 255, 255), width=max(1, scale // 4))
    trk = path_points(tracked)
    if len(trk) >= 2:
        draw.line(trk, fill=(255, 128, 0), width=max(1, scale // 4))
    for pts, color in ((tgt, (255, 255, 255)), (trk, (255, 128, 0))):
        if pts:
            x, y = pts[0]
            r = max(2, scale // 2)
            draw.ellipse([x - r, y - r, x + r, y + r], outline=color, width=2)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    img.save(path, "PNG")
