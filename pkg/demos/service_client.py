"""Drive the HTTP generation service the way the browser editor does.

Starts the service on an ephemeral port with a quickly trained miniature
model, POSTs a stroke request, polls the job until it finishes, and saves the
returned frames. The request/response bodies here are the whole contract the
frontend builds against.

Run:  python3 demos/service_client.py
"""

import json
import threading
import time
import urllib.request
from pathlib import Path

import numpy as np

from dragflow.conditions import DropRatios
from dragflow.diffusion import (
    STAGE_DENSE_FLOW,
    STAGE_SPARSE_TRAJECTORY,
    SamplerConfig,
    TrainStageConfig,
    adaptive_train,
)
from dragflow.model import ModelConfig, VideoModel
from dragflow.scenes import LinearMotion, SceneSpec, SpriteSpec
from dragflow.sprites import default_vocab, generate_scene
from dragflow.service import StudioService, make_server
from dragflow.trajectory import AnchorConfig

OUT = Path(__file__).resolve().parent / "out" / "service_client"


def quick_model(scene):
    smp = generate_scene(scene)
    vocab = default_vocab()
    cfg = ModelConfig(levels=2, channels=(6, 8), frames=3, height=16, width=16,
                      vocab_size=len(vocab.tokens), text_length=8, text_dim=8,
                      image_cond_channels=4, trajectory_cond_channels=4,
                      cond_hidden=5, heads=2, time_dim=12, timesteps=10)
    model = VideoModel(cfg, vocab, np.random.default_rng(0))
    drop = DropRatios(0.1, 0.1, 0.1)
    sampler = SamplerConfig(anchor=AnchorConfig(interval=4, max_trajectories=4))
    stage1 = TrainStageConfig(stage=STAGE_DENSE_FLOW, steps=30, learning_rate=2e-3, drop=drop)
    stage2 = TrainStageConfig(stage=STAGE_SPARSE_TRAJECTORY, steps=30,
                              learning_rate=1e-3, drop=drop, sampler=sampler)

    def batches():
        while True:
            yield [smp]

    model, _ = adaptive_train(model, batches(), stage1, stage2, np.random.default_rng(3))
    return model


def main():
    scene = SceneSpec(width=16, height=16, frames=3, sprites=[
        SpriteSpec(shape="square", color=1, size=5.0, start=(8.0, 8.0),
                   motion=LinearMotion(velocity=(1.0, 0.0)))])
    print("training a throwaway model (about half a minute)...")
    model = quick_model(scene)

    OUT.mkdir(parents=True, exist_ok=True)
    service = StudioService(model, OUT / "artifacts", base_scene=scene)
    httpd = make_server(service, "127.0.0.1", 0)
    port = httpd.server_address[1]
    threading.Thread(target=httpd.serve_forever, daemon=True).start()
    base = f"http://127.0.0.1:{port}"
    print(f"service on {base}")

    try:
        with urllib.request.urlopen(f"{base}/api/health") as resp:
            print("health:", json.loads(resp.read()))

        body = {
            "caption": "red square moves right",
            "seed": 11,
            "guidance": 1.5,
            "strokes": {
                "canvas": {"width": 16, "height": 16, "frames": 3},
                "strokes": [[{"x": 8, "y": 8}, {"x": 13, "y": 8}]],
            },
        }
        req = urllib.request.Request(
            f"{base}/api/generate", data=json.dumps(body).encode(),
            headers={"Content-Type": "application/json"}, method="POST")
        with urllib.request.urlopen(req) as resp:
            job = json.loads(resp.read())
        print(f"submitted job {job['job_id']} (seed {job['seed']})")

        while True:
            with urllib.request.urlopen(f"{base}/api/jobs/{job['job_id']}") as resp:
                status = json.loads(resp.read())
            print(f"  {status['state']} {status.get('progress')}")
            if status["state"] in ("done", "failed"):
                break
            time.sleep(0.5)

        if status["state"] == "done":
            for k, frame_url in enumerate(status["frames"]):
                with urllib.request.urlopen(base + frame_url) as resp:
                    (OUT / f"frame_{k:04d}.png").write_bytes(resp.read())
            print(f"saved {len(status['frames'])} frames to {OUT}")
        else:
            print("job failed:", status.get("error"))
    finally:
        httpd.shutdown()
        service.stop()


if __name__ == "__main__":
    main()
