"""Command line: dataset generation, training, sampling, evaluation,
trajectory sampling on stored flow, and the HTTP service.

Artifacts land under --out when given, else under DRAGFLOW_HOME
(default ~/.dragflow).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .conditions import DropRatios
from .diffusion import (
    STAGE_DENSE_FLOW,
    STAGE_SPARSE_TRAJECTORY,
    TrainStageConfig,
    adaptive_train,
)
from .flow import write_flow_dir, read_flow_dir
from .metrics import (
    centroid_track,
    evaluate_sample,
    evaluation_report,
    save_overlay_png,
    write_report,
)
from .model import ModelConfig, VideoModel, load_model, save_model
from .scenes import PALETTE, load_scene, save_scene, scene_from_dict, sprite_path
from .service import StudioService, execute_request, parse_generate_request, serve_forever
from .sprites import DatasetConfig, dataset_stream, default_vocab, generate_scene, random_scene
from .trajectory import (
    AnchorConfig,
    SamplerConfig,
    gaussian_enhance,
    sample_trajectories,
)
from .video_io import read_video_dir


def artifact_root() -> Path:
    return Path(os.environ.get("DRAGFLOW_HOME", "~/.dragflow")).expanduser()


# ---------------------------------------------------------------------------
# gen-data


def _cmd_gen_data(args) -> int:
    out = Path(args.out) if args.out else artifact_root() / "datasets" / "default"
    out.mkdir(parents=True, exist_ok=True)
    cfg = DatasetConfig(width=args.width, height=args.height, frames=args.frames)
    rng = np.random.default_rng(args.seed)
    from .conditions import save_vocabulary

    save_vocabulary(out / "vocab.txt", default_vocab())
    for i in range(args.count):
        sample = generate_scene(random_scene(rng, cfg))
        d = out / f"sample_{i:04d}"
        from .video_io import write_video_dir

        write_video_dir(d / "frames", sample.pixels)
        write_flow_dir(d / "flow", sample.flow)
        save_scene(d / "scene.json", sample.scene)
        (d / "caption.txt").write_text(sample.caption + "\n", encoding="utf-8")
        lead = sample.scene.sprites[0]
        (d / "target.json").write_text(
            json.dumps(
                {
                    "color": PALETTE[lead.color][0],
                    "path": sprite_path(lead, sample.scene.frames).tolist(),
                },
                indent=2,
            )
            + "\n",
            encoding="utf-8",
        )
    print(f"wrote {args.count} samples to {out}")
    return 0


# ---------------------------------------------------------------------------
# train


def _stage_config(d: dict, stage: str, batch_size: int) -> TrainStageConfig:
    drop = DropRatios(**d.get("drop", {}))
    samp = d.get("sampler", {})
    sampler = SamplerConfig(
        anchor=AnchorConfig(
            interval=int(samp.get("interval", 16)),
            max_trajectories=int(samp.get("max_trajectories", 8)),
        ),
        kernel_size=int(samp.get("kernel_size", 99)),
        sigma=float(samp.get("sigma", 10.0)),
    )
    return TrainStageConfig(
        stage=stage,
        steps=int(d.get("steps", 0)),
        batch_size=batch_size,
        learning_rate=float(d.get("learning_rate", 1e-3)),
        drop=drop,
        sampler=sampler,
    )


def _training_batches(data: dict, model_cfg: ModelConfig, seed: int):
    batch_size = int(data.get("batch_size", 1))
    if "scenes" in data:
        samples = [generate_scene(scene_from_dict(s)) for s in data["scenes"]]
        for s in samples:
            if s.pixels.shape != (model_cfg.frames, 3, model_cfg.height, model_cfg.width):
                raise ValueError(
                    f"fixture scene renders {s.pixels.shape}, model wants "
                    f"({model_cfg.frames}, 3, {model_cfg.height}, {model_cfg.width})"
                )

        def fixture_batches():
            i = 0
            while True:
                batch = [samples[(i + j) % len(samples)] for j in range(batch_size)]
                i = (i + batch_size) % len(samples)
                yield batch

        return fixture_batches(), batch_size
    keys = {k: v for k, v in data.items() if k != "batch_size"}
    cfg = DatasetConfig(
        width=model_cfg.width, height=model_cfg.height, frames=model_cfg.frames,
        batch_size=batch_size, **keys,
    )
    return dataset_stream(cfg, seed), batch_size


def _cmd_train(args) -> int:
    cfg_path = Path(args.config)
    if not cfg_path.exists():
        raise FileNotFoundError(f"training config not found: {cfg_path}")
    cfg = json.loads(cfg_path.read_text(encoding="utf-8"))
    vocab = default_vocab()
    model_dict = dict(cfg.get("model", {}))
    model_dict.setdefault("vocab_size", len(vocab))
    model_cfg = ModelConfig(**model_dict)
    seed = int(cfg.get("seed", 0))
    model = VideoModel(model_cfg, vocab, np.random.default_rng(seed))

    batches, batch_size = _training_batches(dict(cfg.get("data", {})), model_cfg, seed)
    stage1 = _stage_config(dict(cfg.get("stage1", {})), STAGE_DENSE_FLOW, batch_size)
    stage2 = _stage_config(dict(cfg.get("stage2", {})), STAGE_SPARSE_TRAJECTORY, batch_size)

    out = Path(args.out or cfg.get("out") or artifact_root() / "runs" / cfg_path.stem)
    out.mkdir(parents=True, exist_ok=True)
    every = int(cfg.get("checkpoint_every", 0))
    log_every = max(1, (stage1.steps + stage2.steps) // 20 or 1)

    def log(step, stage, loss):
        if step % log_every == 0:
            print(f"step {step} [{stage}] loss {loss:.4f}", flush=True)

    model, trace = adaptive_train(
        model, batches, stage1, stage2, np.random.default_rng(seed + 1),
        trace_path=out / "trace.csv",
        checkpoint_dir=out / "checkpoints" if every else None,
        checkpoint_every=every,
        log=log,
    )
    save_model(model, out / "model.drgf")
    if trace:
        tail = [loss for _, _, loss in trace[-100:]]
        print(f"final-100 mean loss {np.mean(tail):.4f}")
    print(f"saved model to {out / 'model.drgf'}")
    return 0


# ---------------------------------------------------------------------------
# sample


def _cmd_sample(args) -> int:
    model = load_model(Path(args.model))
    body = {}
    if args.request:
        req_path = Path(args.request)
        if not req_path.exists():
            raise FileNotFoundError(f"request file not found: {req_path}")
        body = json.loads(req_path.read_text(encoding="utf-8"))
    if args.seed is not None:
        body["seed"] = args.seed
    if args.guidance is not None:
        body["guidance"] = args.guidance
    cfg = model.config
    base = np.zeros((3, cfg.height, cfg.width))
    req = parse_generate_request(body, model, base)
    for w in req.warnings:
        print(f"warning: {w}", file=sys.stderr)
    out = Path(args.out) if args.out else artifact_root() / "samples" / f"seed_{req.seed}"
    execute_request(model, req, out)
    print(f"wrote {cfg.frames} frames to {out} (seed {req.seed})")
    return 0


# ---------------------------------------------------------------------------
# eval


def _color_id(value) -> int:
    if isinstance(value, int):
        return value
    names = [name for name, _ in PALETTE]
    if value in names:
        return names.index(value)
    raise ValueError(f"unknown color {value!r}; palette: {names}")


def _sample_dirs(root: Path) -> list[Path]:
    if (root / "frame_0000.png").exists():
        return [root]
    dirs = sorted(
        d for d in root.iterdir() if d.is_dir() and (d / "frames" / "frame_0000.png").exists()
    )
    if dirs:
        return dirs
    dirs = sorted(d for d in root.iterdir() if d.is_dir() and (d / "frame_0000.png").exists())
    if not dirs:
        raise ValueError(f"no evaluable sample directories under {root}")
    return dirs


def _cmd_eval(args) -> int:
    root = Path(args.dir)
    if not root.exists():
        raise FileNotFoundError(f"evaluation directory not found: {root}")
    entries = []
    for d in _sample_dirs(root):
        frames_dir = d / "frames" if (d / "frames").is_dir() else d
        target_path = d / "target.json"
        if not target_path.exists():
            raise FileNotFoundError(f"missing target.json in {d}")
        target = json.loads(target_path.read_text(encoding="utf-8"))
        frames = read_video_dir(frames_dir)
        color = _color_id(target["color"])
        path = np.asarray(target["path"], dtype=np.float64)
        reference = None
        if target.get("reference"):
            reference = read_video_dir(d / target["reference"])
        entry = evaluate_sample(frames, path, color, reference)
        entry["sample"] = d.name
        entries.append(entry)
        if args.overlays:
            tracked = centroid_track(frames, color)
            save_overlay_png(d / "overlay.png", frames[0], tracked, path)
    report = evaluation_report(entries)
    out = Path(args.report) if args.report else root / "report.json"
    write_report(out, report)
    agg = report["aggregate"]
    print(
        f"evaluated {agg['samples']} samples: mean {agg['mean_px']:.3f} px, "
        f"max {agg['max_px']:.3f} px" + (f", psnr {agg['psnr']:.2f} dB" if agg["psnr"] else "")
    )
    print(f"report written to {out}")
    return 0


# ---------------------------------------------------------------------------
# sample-traj


def _cmd_sample_traj(args) -> int:
    flow = read_flow_dir(Path(args.flow))
    cfg = SamplerConfig(
        anchor=AnchorConfig(interval=args.interval, max_trajectories=args.max_traj),
        kernel_size=args.kernel,
        sigma=args.sigma,
    )
    rng = np.random.default_rng(args.seed)
    tset = sample_trajectories(flow, cfg.anchor, rng)
    grid = gaussian_enhance(tset.sparse, cfg.kernel_size, cfg.sigma).grid
    out = Path(args.out) if args.out else artifact_root() / "trajectories" / f"seed_{args.seed}"
    out.mkdir(parents=True, exist_ok=True)
    from .flow import FlowField

    write_flow_dir(out / "map", FlowField(frames=grid))
    (out / "paths.json").write_text(
        json.dumps({"paths": tset.paths.tolist()}, indent=2) + "\n", encoding="utf-8"
    )
    _write_magnitude_preview(out / "preview.png", grid)
    print(f"sampled {tset.paths.shape[0]} trajectories from {args.flow} into {out}")
    return 0


def _write_magnitude_preview(path: Path, grid: np.ndarray, scale: int = 8) -> None:
    """Grayscale heatmap of summed per-frame flow magnitude."""
    from PIL import Image

    mag = np.sqrt(grid[:, 0] ** 2 + grid[:, 1] ** 2).sum(axis=0)
    top = float(mag.max())
    if top > 0:
        mag = mag / top
    img = Image.fromarray((mag * 255).round().astype(np.uint8), "L")
    img = img.resize((img.width * scale, img.height * scale), Image.NEAREST)
    img.save(path, "PNG")


# ---------------------------------------------------------------------------
# serve


def _cmd_serve(args) -> int:
    model = load_model(Path(args.model))
    base_scene = load_scene(args.scene) if args.scene else None
    service = StudioService(
        model,
        artifact_root() / "service",
        base_scene=base_scene,
        static_dir=args.static,
    )
    print(f"serving on http://{args.host}:{args.port}", flush=True)
    serve_forever(service, args.host, args.port)
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dragflow",
        description="Trajectory-controlled sprite video diffusion toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="write synthetic sprite videos with flow")
    p.add_argument("--out", default=None)
    p.add_argument("--count", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--width", type=int, default=32)
    p.add_argument("--height", type=int, default=32)
    p.add_argument("--frames", type=int, default=8)
    p.set_defaults(func=_cmd_gen_data)

    p = sub.add_parser("train", help="run two-stage training from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("sample", help="generate a video from a request file")
    p.add_argument("--model", required=True)
    p.add_argument("--request", default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--guidance", type=float, default=None)
    p.set_defaults(func=_cmd_sample)

    p = sub.add_parser("eval", help="score generated videos against target paths")
    p.add_argument("--dir", required=True)
    p.add_argument("--report", default=None)
    p.add_argument("--overlays", action="store_true")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("sample-traj", help="sample sparse trajectories from stored flow")
    p.add_argument("--flow", required=True)
    p.add_argument("--lambda", dest="interval", type=int, default=16)
    p.add_argument("--max-traj", dest="max_traj", type=int, default=8)
    p.add_argument("--kernel", type=int, default=99)
    p.add_argument("--sigma", type=float, default=10.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_sample_traj)

    p = sub.add_parser("serve", help="start the HTTP generation service")
    p.add_argument("--model", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--scene", default=None, help="scene JSON for the base canvas")
    p.add_argument("--static", default=None, help="directory of frontend files to serve")
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except KeyboardInterrupt:
        return 130
    except Exception as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
