"""Trajectory sampling: anchored flow, weighted anchor selection, iterative
tracking, and Gaussian enhancement into a dense trajectory map.

Positions are continuous (x, y) pairs, x rightward and y downward, matching
the flow convention. Arrays are indexed [channel(u, v), row(y), col(x)].
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .flow import FlowField, FlowFrame, flow_magnitude


class TrajectoryError(ValueError):
    pass


@dataclass(frozen=True)
class AnchorConfig:
    """Anchor lattice interval and trajectory-count ceiling."""

    interval: int = 16
    max_trajectories: int = 8

    def __post_init__(self):
        if self.interval < 1:
            raise TrajectoryError(f"interval must be >= 1, got {self.interval}")
        if self.max_trajectories < 1:
            raise TrajectoryError(
                f"max_trajectories must be >= 1, got {self.max_trajectories}"
            )


@dataclass(frozen=True)
class SamplerConfig:
    """Full trajectory-sampler settings: lattice plus enhancement kernel."""

    anchor: AnchorConfig = field(default_factory=AnchorConfig)
    kernel_size: int = 99
    sigma: float = 10.0


@dataclass
class TrajectorySet:
    """Tracked point paths plus the sparse displacement grid they induce.

    paths: (n, L, 2) continuous (x, y) positions, clamped to the frame.
    sparse: (L-1, 2, H, W) displacement written at each path's rounded
    position per frame, zero elsewhere.
    """

    paths: np.ndarray
    sparse: np.ndarray

    def __post_init__(self):
        self.paths = np.asarray(self.paths, dtype=np.float64)
        self.sparse = np.asarray(self.sparse, dtype=np.float64)
        if self.paths.ndim != 3 or self.paths.shape[2] != 2:
            raise TrajectoryError(f"paths must be (n, L, 2), got {self.paths.shape}")
        if self.sparse.ndim != 4 or self.sparse.shape[1] != 2:
            raise TrajectoryError(
                f"sparse grid must be (L-1, 2, H, W), got {self.sparse.shape}"
            )
        if self.sparse.shape[0] != self.paths.shape[1] - 1:
            raise TrajectoryError(
                f"{self.paths.shape[1]} path positions need "
                f"{self.paths.shape[1] - 1} sparse frames, got {self.sparse.shape[0]}"
            )


@dataclass
class TrajectoryMap:
    """Gaussian-enhanced dense trajectory grid, (L-1, 2, H, W)."""

    grid: np.ndarray

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=np.float64)
        if self.grid.ndim != 4 or self.grid.shape[1] != 2:
            raise TrajectoryError(f"grid must be (L-1, 2, H, W), got {self.grid.shape}")
        if not np.isfinite(self.grid).all():
            raise TrajectoryError("trajectory map has non-finite values")


def anchor_positions(height: int, width: int, cfg: AnchorConfig, delta) -> np.ndarray:
    """All lattice positions: rows i with (i+dy) % interval == 0 and columns
    j with (j+dx) % interval == 0. Returns (P, 2) ints as (x, y), row-major."""
    dx, dy = _check_delta(cfg, delta)
    lam = cfg.interval
    rows = np.nonzero((np.arange(height) + dy) % lam == 0)[0]
    cols = np.nonzero((np.arange(width) + dx) % lam == 0)[0]
    yy, xx = np.meshgrid(rows, cols, indexing="ij")
    return np.stack([xx.ravel(), yy.ravel()], axis=1).astype(np.int64)


def _check_delta(cfg: AnchorConfig, delta):
    dx, dy = int(delta[0]), int(delta[1])
    half = cfg.interval / 2.0
    if not (-half <= dx < half) or not (-half <= dy < half):
        raise TrajectoryError(
            f"offset {(dx, dy)} outside [-{half}, {half}) for interval {cfg.interval}"
        )
    return dx, dy


def draw_offset(rng: np.random.Generator, cfg: AnchorConfig):
    """One global integer (dx, dy) perturbation, uniform on [-interval/2, interval/2)."""
    lam = cfg.interval
    lo, hi = -(lam // 2), lam - lam // 2
    return int(rng.integers(lo, hi)), int(rng.integers(lo, hi))


def anchor_flow(f0: FlowFrame, cfg: AnchorConfig, delta) -> FlowFrame:
    """Zero the first-frame flow everywhere except at lattice positions."""
    dx, dy = _check_delta(cfg, delta)
    lam = cfg.interval
    h, w = f0.height, f0.width
    row_ok = (np.arange(h) + dy) % lam == 0
    col_ok = (np.arange(w) + dx) % lam == 0
    mask = np.outer(row_ok, col_ok)
    return FlowFrame(f0.uv * mask[None, :, :])


def sample_anchor_count(rng: np.random.Generator, max_trajectories: int) -> int:
    """Uniform integer in 1..max_trajectories inclusive."""
    if max_trajectories < 1:
        raise TrajectoryError(f"max_trajectories must be >= 1, got {max_trajectories}")
    return int(rng.integers(1, max_trajectories + 1))


def sample_anchors(
    fa: FlowFrame, anchors: np.ndarray, n: int, rng: np.random.Generator
) -> np.ndarray:
    """Draw n distinct anchor positions, probability proportional to the
    anchored-flow magnitude; uniform over what's left once weights hit zero.

    Returns (n, 2) float64 (x, y) start points. n is capped at the number of
    available anchors.
    """
    pos = np.asarray(anchors, dtype=np.int64).reshape(-1, 2)
    if pos.shape[0] == 0:
        raise TrajectoryError("no anchor positions available")
    if n < 1:
        raise TrajectoryError(f"anchor count must be >= 1, got {n}")
    n = min(n, pos.shape[0])
    mag = flow_magnitude(fa)[pos[:, 1], pos[:, 0]]
    avail = np.ones(pos.shape[0], dtype=bool)
    chosen = np.empty((n, 2), dtype=np.float64)
    for k in range(n):
        weights = np.where(avail, mag, 0.0)
        total = weights.sum()
        if total > 0.0:
            p = weights / total
        else:
            p = avail / avail.sum()
        idx = int(rng.choice(pos.shape[0], p=p))
        avail[idx] = False
        chosen[k] = pos[idx]
    return chosen


def bilinear_flow(uv: np.ndarray, x: float, y: float) -> np.ndarray:
    """Sample a (2, H, W) flow frame at a continuous position, clamping
    lookups to the border."""
    h, w = uv.shape[1], uv.shape[2]
    x0 = min(max(int(math.floor(x)), 0), w - 1)
    y0 = min(max(int(math.floor(y)), 0), h - 1)
    x1 = min(x0 + 1, w - 1)
    y1 = min(y0 + 1, h - 1)
    fx = min(max(x - x0, 0.0), 1.0)
    fy = min(max(y - y0, 0.0), 1.0)
    top = uv[:, y0, x0] * (1.0 - fx) + uv[:, y0, x1] * fx
    bot = uv[:, y1, x0] * (1.0 - fx) + uv[:, y1, x1] * fx
    return top * (1.0 - fy) + bot * fy


def track(anchors: np.ndarray, flow: FlowField) -> TrajectorySet:
    """Advance each start point through the flow field one frame at a time.

    Each step samples the displacement bilinearly at the current position,
    records it in the sparse grid at the rounded position, then moves and
    clamps the point to the frame.
    """
    starts = np.asarray(anchors, dtype=np.float64).reshape(-1, 2)
    L = flow.num_frames + 1
    h, w = flow.height, flow.width
    n = starts.shape[0]
    paths = np.zeros((n, L, 2), dtype=np.float64)
    sparse = np.zeros((L - 1, 2, h, w), dtype=np.float64)
    for k in range(n):
        px = min(max(starts[k, 0], 0.0), w - 1.0)
        py = min(max(starts[k, 1], 0.0), h - 1.0)
        paths[k, 0] = (px, py)
        for t in range(L - 1):
            d = bilinear_flow(flow.frames[t], px, py)
            xi = min(max(int(math.floor(px + 0.5)), 0), w - 1)
            yi = min(max(int(math.floor(py + 0.5)), 0), h - 1)
            sparse[t, 0, yi, xi] = d[0]
            sparse[t, 1, yi, xi] = d[1]
            px = min(max(px + d[0], 0.0), w - 1.0)
            py = min(max(py + d[1], 0.0), h - 1.0)
            paths[k, t + 1] = (px, py)
    return TrajectorySet(paths=paths, sparse=sparse)


def gaussian_kernel_1d(kernel_size: int, sigma: float) -> np.ndarray:
    """Peak-normalized Gaussian taps: the center weight is exactly 1, so
    enhancement preserves an isolated point's displacement magnitude."""
    if kernel_size < 1 or kernel_size % 2 == 0:
        raise TrajectoryError(f"kernel_size must be a positive odd int, got {kernel_size}")
    if sigma <= 0.0:
        raise TrajectoryError(f"sigma must be > 0, got {sigma}")
    d = np.arange(kernel_size, dtype=np.float64) - kernel_size // 2
    return np.exp(-(d**2) / (2.0 * sigma**2))


def _filter_axis(arr: np.ndarray, taps: np.ndarray, axis: int) -> np.ndarray:
    r = taps.size // 2
    pad = [(0, 0)] * arr.ndim
    pad[axis] = (r, r)
    padded = np.pad(arr, pad)
    out = np.zeros_like(arr)
    n = arr.shape[axis]
    index = [slice(None)] * arr.ndim
    for d in range(taps.size):
        index[axis] = slice(d, d + n)
        out += taps[d] * padded[tuple(index)]
    return out


def gaussian_enhance(
    sparse: np.ndarray, kernel_size: int = 99, sigma: float = 10.0
) -> TrajectoryMap:
    """Spread each sparse displacement over a Gaussian neighborhood.

    Separable 2-D filtering with zero-padded borders; the symmetric kernel
    makes correlation and convolution identical.
    """
    arr = np.asarray(sparse, dtype=np.float64)
    if arr.ndim != 4 or arr.shape[1] != 2:
        raise TrajectoryError(f"sparse grid must be (L-1, 2, H, W), got {arr.shape}")
    taps = gaussian_kernel_1d(kernel_size, sigma)
    out = _filter_axis(arr, taps, axis=2)
    out = _filter_axis(out, taps, axis=3)
    return TrajectoryMap(out)


def sample_trajectories(
    flow: FlowField, cfg: AnchorConfig, rng: np.random.Generator
) -> TrajectorySet:
    """Draw the perturbation, anchor the first-frame flow, pick how many and
    which anchors to follow, and track them through the field."""
    if flow.num_frames < 1:
        raise TrajectoryError("flow field must have at least one frame")
    delta = draw_offset(rng, cfg)
    fa = anchor_flow(flow.frame(0), cfg, delta)
    n = sample_anchor_count(rng, cfg.max_trajectories)
    anchors = anchor_positions(flow.height, flow.width, cfg, delta)
    starts = sample_anchors(fa, anchors, n, rng)
    return track(starts, flow)


def sample_trajectory_map(
    flow: FlowField,
    cfg: AnchorConfig,
    kernel_size: int,
    sigma: float,
    rng: np.random.Generator,
) -> TrajectoryMap:
    """End-to-end training-time sampler: tracked trajectories, enhanced."""
    tset = sample_trajectories(flow, cfg, rng)
    return gaussian_enhance(tset.sparse, kernel_size, sigma)


def resample_polyline(points: np.ndarray, n: int) -> np.ndarray:
    """Resample a polyline to n positions equally spaced by arc length.

    Endpoints are preserved; a zero-length polyline repeats its first point.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if pts.shape[0] < 1:
        raise TrajectoryError("polyline needs at least one point")
    if n < 1:
        raise TrajectoryError(f"resample count must be >= 1, got {n}")
    if pts.shape[0] == 1:
        return np.repeat(pts, n, axis=0)
    seg = np.diff(pts, axis=0)
    cum = np.concatenate([[0.0], np.cumsum(np.sqrt((seg**2).sum(axis=1)))])
    if cum[-1] == 0.0:
        return np.repeat(pts[:1], n, axis=0)
    targets = np.linspace(0.0, cum[-1], n)
    x = np.interp(targets, cum, pts[:, 0])
    y = np.interp(targets, cum, pts[:, 1])
    return np.stack([x, y], axis=1)


def user_trajectory_to_map(
    strokes,
    frames: int,
    height: int,
    width: int,
    kernel_size: int = 99,
    sigma: float = 10.0,
) -> TrajectoryMap:
    """Turn user-drawn strokes into a trajectory map the same way training
    does: resample each stroke to one position per frame, rasterize the
    per-frame displacements at rounded positions, then enhance."""
    if frames < 2:
        raise TrajectoryError(f"need at least 2 frames, got {frames}")
    sparse = np.zeros((frames - 1, 2, height, width), dtype=np.float64)
    for si, stroke in enumerate(strokes):
        pts = np.asarray(stroke, dtype=np.float64).reshape(-1, 2)
        if pts.shape[0] < 2:
            raise TrajectoryError(
                f"strokes[{si}]: need at least 2 points, got {pts.shape[0]}"
            )
        for pi in range(pts.shape[0]):
            x, y = pts[pi]
            if not (np.isfinite(x) and np.isfinite(y)):
                raise TrajectoryError(f"strokes[{si}][{pi}]: non-finite coordinate")
            if not (0.0 <= x <= width - 1.0 and 0.0 <= y <= height - 1.0):
                raise TrajectoryError(
                    f"strokes[{si}][{pi}]: ({x}, {y}) outside "
                    f"[0, {width - 1}] x [0, {height - 1}]"
                )
        path = resample_polyline(pts, frames)
        for t in range(frames - 1):
            d = path[t + 1] - path[t]
            xi = min(max(int(math.floor(path[t, 0] + 0.5)), 0), width - 1)
            yi = min(max(int(math.floor(path[t, 1] + 0.5)), 0), height - 1)
            sparse[t, 0, yi, xi] = d[0]
            sparse[t, 1, yi, xi] = d[1]
    return gaussian_enhance(sparse, kernel_size, sigma)


@dataclass
class TrajectoryDocument:
    """Parsed interchange document: canvas geometry plus stroke point lists."""

    width: int
    height: int
    frames: int
    strokes: list

    def scaled_strokes(self, height: int, width: int) -> list:
        """Stroke coordinates mapped from document canvas space onto a
        height x width pixel grid, clamped to valid pixel centers."""
        sx = width / self.width
        sy = height / self.height
        out = []
        for s in self.strokes:
            x = np.clip(s[:, 0] * sx, 0.0, width - 1.0)
            y = np.clip(s[:, 1] * sy, 0.0, height - 1.0)
            out.append(np.stack([x, y], axis=1))
        return out


def _require_positive_int(obj, key: str, where: str) -> int:
    v = obj.get(key)
    if not isinstance(v, int) or isinstance(v, bool) or v < 1:
        raise TrajectoryError(f"{where}.{key}: expected a positive integer, got {v!r}")
    return v


def parse_trajectory_document(doc) -> TrajectoryDocument:
    """Validate and load an interchange document.

    Accepts a JSON string/bytes or an already-decoded object. Error messages
    name the offending field path and point index.
    """
    if isinstance(doc, (str, bytes)):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as e:
            raise TrajectoryError(f"document is not valid JSON: {e}") from e
    if not isinstance(doc, dict):
        raise TrajectoryError("document root: expected an object")
    canvas = doc.get("canvas")
    if not isinstance(canvas, dict):
        raise TrajectoryError("canvas: expected an object")
    width = _require_positive_int(canvas, "width", "canvas")
    height = _require_positive_int(canvas, "height", "canvas")
    frames = _require_positive_int(canvas, "frames", "canvas")
    if frames < 2:
        raise TrajectoryError(f"canvas.frames: expected >= 2, got {frames}")
    raw = doc.get("strokes")
    if not isinstance(raw, list):
        raise TrajectoryError("strokes: expected a list")
    strokes = []
    for si, stroke in enumerate(raw):
        if not isinstance(stroke, list):
            raise TrajectoryError(f"strokes[{si}]: expected a list of points")
        if len(stroke) < 2:
            raise TrajectoryError(
                f"strokes[{si}]: need at least 2 points, got {len(stroke)}"
            )
        pts = np.empty((len(stroke), 2), dtype=np.float64)
        for pi, point in enumerate(stroke):
            if not isinstance(point, dict):
                raise TrajectoryError(f"strokes[{si}][{pi}]: expected an object")
            for axis in ("x", "y"):
                v = point.get(axis)
                if isinstance(v, bool) or not isinstance(v, (int, float)):
                    raise TrajectoryError(
                        f"strokes[{si}][{pi}].{axis}: expected a number, got {v!r}"
                    )
                if not math.isfinite(v):
                    raise TrajectoryError(
                        f"strokes[{si}][{pi}].{axis}: expected a finite number"
                    )
            x, y = float(point["x"]), float(point["y"])
            if not (0.0 <= x < width and 0.0 <= y < height):
                raise TrajectoryError(
                    f"strokes[{si}][{pi}]: ({x}, {y}) outside canvas "
                    f"{width}x{height}"
                )
            pts[pi] = (x, y)
        strokes.append(pts)
    return TrajectoryDocument(width=width, height=height, frames=frames, strokes=strokes)


def serialize_trajectory_document(doc: TrajectoryDocument) -> str:
    obj = {
        "canvas": {"width": doc.width, "height": doc.height, "frames": doc.frames},
        "strokes": [
            [{"x": float(x), "y": float(y)} for x, y in stroke]
            for stroke in doc.strokes
        ],
    }
    return json.dumps(obj, sort_keys=True)


def document_to_map(
    doc: TrajectoryDocument,
    height: int,
    width: int,
    kernel_size: int = 99,
    sigma: float = 10.0,
) -> TrajectoryMap:
    """Scale a document's strokes to the model grid and build the map."""
    strokes = doc.scaled_strokes(height, width)
    return user_trajectory_to_map(
        strokes, doc.frames, height, width, kernel_size, sigma
    )
