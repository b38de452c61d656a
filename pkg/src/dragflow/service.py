"""Local HTTP service backing the trajectory editor.

One worker thread runs generation jobs in FIFO order; HTTP handling is
concurrent and the job table is lock-guarded. All randomness flows from the
request seed; a missing seed is sampled server-side and echoed back so every
result is reproducible.
"""

from __future__ import annotations

import base64
import copy
import io
import json
import queue
import threading
import traceback
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import numpy as np
from PIL import Image

from . import __version__
from .diffusion import sample, schedule_for
from .model import VideoModel
from .scenes import SceneSpec, load_scene, render_scene, scene_from_dict
from .trajectory import TrajectoryDocument, parse_trajectory_document, user_trajectory_to_map
from .video_io import condition_hashes, write_meta, write_video_dir


class RequestError(ValueError):
    """Invalid generation request; the message names the offending field."""


# ---------------------------------------------------------------------------
# generation requests


@dataclass
class GenerateRequest:
    caption: str
    first_frame: np.ndarray  # (3, H, W) in [0, 1]
    motion: np.ndarray  # (L-1, 2, H, W) enhanced trajectory map (zero if none)
    seed: int
    guidance: float
    warnings: list = field(default_factory=list)
    seed_was_absent: bool = False
    document: TrajectoryDocument | None = None


def _decode_png_b64(data: str, height: int, width: int) -> np.ndarray:
    try:
        raw = base64.b64decode(data, validate=True)
        with Image.open(io.BytesIO(raw)) as img:
            rgb = np.asarray(img.convert("RGB"), dtype=np.float64)
    except Exception as e:
        raise RequestError(f"image.png is not a decodable base64 PNG: {e}") from None
    if rgb.shape[:2] != (height, width):
        raise RequestError(
            f"image.png is {rgb.shape[1]}x{rgb.shape[0]}, model canvas is {width}x{height}"
        )
    return rgb.transpose(2, 0, 1) / 255.0


def _image_from_request(value, model: VideoModel, base_frame: np.ndarray) -> np.ndarray:
    cfg = model.config
    if value is None:
        return base_frame
    if isinstance(value, str):
        try:
            scene = load_scene(value)
        except FileNotFoundError:
            raise RequestError(f"image scene file not found: {value}") from None
        except Exception as e:
            raise RequestError(f"image scene file invalid: {e}") from None
        return _render_base(scene, cfg.height, cfg.width)
    if isinstance(value, dict):
        if "png" in value:
            if not isinstance(value["png"], str):
                raise RequestError("image.png must be a base64 string")
            return _decode_png_b64(value["png"], cfg.height, cfg.width)
        if "scene" in value:
            ref = value["scene"]
            if isinstance(ref, str):
                return _image_from_request(ref, model, base_frame)
            if isinstance(ref, dict):
                try:
                    scene = scene_from_dict(ref)
                except Exception as e:
                    raise RequestError(f"image.scene invalid: {e}") from None
                return _render_base(scene, cfg.height, cfg.width)
            raise RequestError("image.scene must be a path or a scene object")
        raise RequestError("image object needs a 'png' or 'scene' key")
    raise RequestError("image must be null, a scene path, or an object")


def _render_base(scene: SceneSpec, height: int, width: int) -> np.ndarray:
    if (scene.height, scene.width) != (height, width):
        raise RequestError(
            f"scene canvas {scene.width}x{scene.height} != model canvas {width}x{height}"
        )
    return render_scene(scene)[0]


def parse_generate_request(body: dict, model: VideoModel, base_frame: np.ndarray,
                           seed_rng: np.random.Generator | None = None) -> GenerateRequest:
    """Validate a request body; raised errors name the bad field."""
    if not isinstance(body, dict):
        raise RequestError("request body must be a JSON object")
    cfg = model.config
    known = {"caption", "image", "strokes", "seed", "guidance"}
    unknown = sorted(set(body) - known)
    if unknown:
        raise RequestError(f"unknown request fields: {unknown}")

    caption = body.get("caption", "")
    if not isinstance(caption, str):
        raise RequestError("caption must be a string")
    _, unknown_tokens = model.vocab.encode_lenient(caption)
    warnings = [f"unknown token {tok!r} replaced with padding" for tok in unknown_tokens]

    first_frame = _image_from_request(body.get("image"), model, base_frame)

    document = None
    strokes = body.get("strokes")
    if strokes is None:
        motion = np.zeros((cfg.frames - 1, 2, cfg.height, cfg.width))
    else:
        try:
            document = parse_trajectory_document(strokes)
        except ValueError as e:
            raise RequestError(str(e)) from None
        if document.frames != cfg.frames:
            raise RequestError(
                f"canvas.frames is {document.frames}, model generates {cfg.frames}"
            )
        scaled = document.scaled_strokes(cfg.height, cfg.width)
        try:
            tmap = user_trajectory_to_map(scaled, cfg.frames, cfg.height, cfg.width)
        except ValueError as e:
            raise RequestError(str(e)) from None
        motion = tmap.grid

    seed = body.get("seed")
    seed_was_absent = seed is None
    if seed_was_absent:
        rng = seed_rng if seed_rng is not None else np.random.default_rng()
        seed = int(rng.integers(0, 2**32))
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise RequestError("seed must be a non-negative integer")

    guidance = body.get("guidance", 3.0)
    if isinstance(guidance, bool) or not isinstance(guidance, (int, float)):
        raise RequestError("guidance must be a number")
    guidance = float(guidance)
    if not np.isfinite(guidance) or guidance < 0:
        raise RequestError("guidance must be finite and >= 0")

    return GenerateRequest(
        caption=caption,
        first_frame=first_frame,
        motion=motion,
        seed=int(seed),
        guidance=guidance,
        warnings=warnings,
        seed_was_absent=seed_was_absent,
        document=document,
    )


def execute_request(model: VideoModel, req: GenerateRequest, out_dir,
                    progress=None) -> np.ndarray:
    """Run one generation and write frames plus meta.json to out_dir.

    This is the single code path shared by the CLI and the HTTP service, so
    identical requests and seeds produce identical artifacts.
    """
    schedule = schedule_for(model)
    conds = model.encode_conditions(req.first_frame, req.motion, req.caption, lenient=True)
    frames = sample(
        model, conds, schedule, np.random.default_rng(req.seed),
        guidance=req.guidance, progress=progress,
    )
    out_dir = Path(out_dir)
    write_video_dir(out_dir, frames)
    cfg = model.config
    write_meta(
        out_dir,
        seed=req.seed,
        guidance=req.guidance,
        schedule={
            "timesteps": cfg.timesteps,
            "beta_start": cfg.beta_start,
            "beta_end": cfg.beta_end,
        },
        conditions=condition_hashes(req.first_frame, req.motion, req.caption),
    )
    return frames


# ---------------------------------------------------------------------------
# job table


_STATES = ("queued", "running", "done", "failed")
_ALLOWED = {("queued", "running"), ("running", "done"), ("running", "failed")}


@dataclass
class JobRecord:
    id: str
    state: str = "queued"
    progress_step: int = 0
    progress_total: int = 0
    error: str | None = None
    directory: str | None = None
    seed: int | None = None
    frame_count: int = 0
    warnings: list = field(default_factory=list)
    strokes: dict | None = None

    def advance(self, state: str) -> None:
        if (self.state, state) not in _ALLOWED:
            raise RuntimeError(f"illegal job transition {self.state} -> {state}")
        self.state = state

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "state": self.state,
            "progress": {"step": self.progress_step, "total": self.progress_total},
            "error": self.error,
            "seed": self.seed,
            "frames": [
                f"/api/jobs/{self.id}/frames/{k}" for k in range(self.frame_count)
            ],
            "warnings": list(self.warnings),
            "strokes": self.strokes,
        }


class StudioService:
    """Owns the model, the job table, and the single generation worker."""

    def __init__(self, model: VideoModel, artifact_root, base_scene: SceneSpec | None = None,
                 static_dir=None, seed_rng: np.random.Generator | None = None):
        self.model = model
        self.root = Path(artifact_root)
        self.root.mkdir(parents=True, exist_ok=True)
        cfg = model.config
        if base_scene is not None:
            self.base_frame = _render_base(base_scene, cfg.height, cfg.width)
        else:
            self.base_frame = np.zeros((3, cfg.height, cfg.width))
        self.static_dir = Path(static_dir) if static_dir else None
        self.seed_rng = seed_rng if seed_rng is not None else np.random.default_rng()
        self._jobs: dict[str, JobRecord] = {}
        self._requests: dict[str, GenerateRequest] = {}
        self._lock = threading.Lock()
        self._queue: queue.Queue = queue.Queue()
        self._counter = 0
        self._worker = threading.Thread(target=self._run_worker, daemon=True)
        self._worker.start()

    # -- job lifecycle ------------------------------------------------------

    def submit(self, body: dict) -> JobRecord:
        req = parse_generate_request(body, self.model, self.base_frame, self.seed_rng)
        with self._lock:
            self._counter += 1
            job_id = f"job-{self._counter:06d}"
            job = JobRecord(
                id=job_id,
                seed=req.seed,
                warnings=list(req.warnings),
                progress_total=self.model.config.timesteps,
                directory=str(self.root / "jobs" / job_id),
                # clients verify their stroke document came through unaltered
                strokes=copy.deepcopy(body.get("strokes")),
            )
            self._jobs[job_id] = job
            self._requests[job_id] = req
        self._queue.put(job_id)
        return job

    def job(self, job_id: str) -> JobRecord | None:
        with self._lock:
            return self._jobs.get(job_id)

    def frame_path(self, job_id: str, k: int) -> Path | None:
        job = self.job(job_id)
        if job is None or job.state != "done" or not (0 <= k < job.frame_count):
            return None
        return Path(job.directory) / f"frame_{k:04d}.png"

    def _run_worker(self) -> None:
        while True:
            job_id = self._queue.get()
            if job_id is None:
                return
            job = self.job(job_id)
            req = self._requests[job_id]
            with self._lock:
                job.advance("running")

            def progress(step, total, job=job):
                with self._lock:
                    job.progress_step = step
                    job.progress_total = total

            try:
                frames = execute_request(self.model, req, job.directory, progress=progress)
                with self._lock:
                    job.frame_count = frames.shape[0]
                    job.advance("done")
            except Exception as e:
                traceback.print_exc()
                with self._lock:
                    job.error = str(e)
                    job.advance("failed")
            finally:
                self._queue.task_done()

    def stop(self, wait: bool = True) -> None:
        # sampling toggles process-global autodiff state, so anyone who will
        # keep using tensors in this process must wait for the drain;
        # wait=False is for process exit only
        self._queue.put(None)
        if wait:
            self._worker.join()

    # -- request-independent endpoints ---------------------------------------

    def canvas_payload(self) -> dict:
        cfg = self.model.config
        rgb = (np.clip(self.base_frame, 0, 1) * 255).round().astype(np.uint8)
        buf = io.BytesIO()
        Image.fromarray(rgb.transpose(1, 2, 0), "RGB").save(buf, "PNG")
        return {
            "width": cfg.width,
            "height": cfg.height,
            "frames": cfg.frames,
            "image": base64.b64encode(buf.getvalue()).decode("ascii"),
        }

    def health_payload(self) -> dict:
        return {
            "status": "ok",
            "version": __version__,
            "config": json.loads(self.model.config.to_json()),
        }


# ---------------------------------------------------------------------------
# HTTP plumbing


_STATIC_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".svg": "image/svg+xml",
    ".png": "image/png",
    ".ico": "image/x-icon",
    ".json": "application/json",
    ".map": "application/json",
}


def make_handler(service: StudioService):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):  # tests stay quiet
            pass

        def _send_json(self, status: int, payload: dict) -> None:
            body = json.dumps(payload).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json; charset=utf-8")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def _send_bytes(self, status: int, content_type: str, body: bytes) -> None:
            self.send_response(status)
            self.send_header("Content-Type", content_type)
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        # -- GET -------------------------------------------------------------

        def do_GET(self):
            path = self.path.split("?", 1)[0]
            if path == "/api/health":
                return self._send_json(200, service.health_payload())
            if path == "/api/canvas":
                return self._send_json(200, service.canvas_payload())
            if path.startswith("/api/jobs/"):
                return self._get_job(path)
            return self._static(path)

        def _get_job(self, path: str):
            parts = [p for p in path.split("/") if p]
            # parts: ["api", "jobs", id] or ["api", "jobs", id, "frames", k]
            if len(parts) == 3:
                job = service.job(parts[2])
                if job is None:
                    return self._send_json(404, {"error": f"unknown job {parts[2]!r}"})
                with service._lock:
                    return self._send_json(200, job.to_dict())
            if len(parts) == 5 and parts[3] == "frames":
                try:
                    k = int(parts[4])
                except ValueError:
                    return self._send_json(400, {"error": "frame index must be an integer"})
                if service.job(parts[2]) is None:
                    return self._send_json(404, {"error": f"unknown job {parts[2]!r}"})
                frame = service.frame_path(parts[2], k)
                if frame is None or not frame.exists():
                    return self._send_json(404, {"error": f"frame {k} not available"})
                return self._send_bytes(200, "image/png", frame.read_bytes())
            return self._send_json(404, {"error": "no such endpoint"})

        def _static(self, path: str):
            if service.static_dir is None:
                return self._send_json(404, {"error": "no such endpoint"})
            rel = "index.html" if path in ("", "/") else path.lstrip("/")
            target = (service.static_dir / rel).resolve()
            try:
                target.relative_to(service.static_dir.resolve())
            except ValueError:
                return self._send_json(404, {"error": "no such file"})
            if not target.is_file():
                return self._send_json(404, {"error": "no such file"})
            ctype = _STATIC_TYPES.get(target.suffix, "application/octet-stream")
            return self._send_bytes(200, ctype, target.read_bytes())

        # -- POST --------------------------------------------------------------

        def do_POST(self):
            path = self.path.split("?", 1)[0]
            if path != "/api/generate":
                return self._send_json(404, {"error": "no such endpoint"})
            length = int(self.headers.get("Content-Length", 0))
            raw = self.rfile.read(length)
            try:
                body = json.loads(raw.decode("utf-8"))
            except (UnicodeDecodeError, json.JSONDecodeError):
                return self._send_json(400, {"error": "request body is not valid JSON"})
            try:
                job = service.submit(body)
            except RequestError as e:
                return self._send_json(400, {"error": str(e)})
            return self._send_json(
                200,
                {"job_id": job.id, "seed": job.seed, "warnings": job.warnings},
            )

    return Handler


def make_server(service: StudioService, host: str = "127.0.0.1", port: int = 8000) -> ThreadingHTTPServer:
    return ThreadingHTTPServer((host, port), make_handler(service))


def serve_forever(service: StudioService, host: str, port: int) -> None:
    server = make_server(service, host, port)
    try:
        server.serve_forever()
    finally:
        server.server_close()
        service.stop(wait=False)
