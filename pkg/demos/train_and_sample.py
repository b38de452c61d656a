"""Train a miniature model on one scene, then drive it with a drawn drag.

Two training stages run back to back: first conditioned on the dense flow,
then on sparse sampled trajectories. A minute of CPU gets a model that puts a
red smear roughly where the drag says; real quality needs the full overfit
recipe in the acceptance tests.

Run:  python3 demos/train_and_sample.py
"""

import time
from pathlib import Path

import numpy as np

from dragflow.conditions import DropRatios
from dragflow.diffusion import (
    STAGE_DENSE_FLOW,
    STAGE_SPARSE_TRAJECTORY,
    SamplerConfig,
    TrainStageConfig,
    adaptive_train,
    sample,
    schedule_for,
)
from dragflow.model import ModelConfig, VideoModel
from dragflow.scenes import LinearMotion, SceneSpec, SpriteSpec
from dragflow.sprites import default_vocab, generate_scene
from dragflow.trajectory import AnchorConfig, user_trajectory_to_map
from dragflow.video_io import write_video_dir

OUT = Path(__file__).resolve().parent / "out" / "train_and_sample"


def main():
    scene = SceneSpec(width=16, height=16, frames=3, sprites=[
        SpriteSpec(shape="square", color=1, size=5.0, start=(8.0, 8.0),
                   motion=LinearMotion(velocity=(1.5, 0.0)))])
    smp = generate_scene(scene)
    print(f"training sample: {smp.pixels.shape}, caption {smp.caption!r}")

    vocab = default_vocab()
    cfg = ModelConfig(levels=2, channels=(8, 12), frames=3, height=16, width=16,
                      vocab_size=len(vocab.tokens), text_length=8, text_dim=16,
                      image_cond_channels=6, trajectory_cond_channels=6,
                      cond_hidden=6, heads=2, time_dim=16, timesteps=20)
    model = VideoModel(cfg, vocab, np.random.default_rng(0))
    print(f"model: {sum(p.data.size for p in model.parameters())} parameters")

    drop = DropRatios(text=0.2, image=0.1, trajectory=0.1)
    sampler = SamplerConfig(anchor=AnchorConfig(interval=4, max_trajectories=4))
    stage1 = TrainStageConfig(stage=STAGE_DENSE_FLOW, steps=250,
                              learning_rate=2e-3, drop=drop)
    stage2 = TrainStageConfig(stage=STAGE_SPARSE_TRAJECTORY, steps=250,
                              learning_rate=1e-3, drop=drop, sampler=sampler)

    def batches():
        while True:
            yield [smp]

    def log(step, stage, value):
        if step % 50 == 0:
            print(f"  step {step:3d} [{stage}] loss {value:.4f}")

    t0 = time.time()
    model, _ = adaptive_train(model, batches(), stage1, stage2,
                              np.random.default_rng(7), log=log)
    print(f"trained in {time.time() - t0:.0f}s")

    # drive it: same first frame, drag the square to the right
    drag = user_trajectory_to_map([[(8.0, 8.0), (12.0, 8.0)]], 3, 16, 16)
    conds = model.encode_conditions(smp.pixels[0], drag.grid, smp.caption)
    video = sample(model, conds, schedule_for(model), np.random.default_rng(1),
                   guidance=1.5)
    OUT.mkdir(parents=True, exist_ok=True)
    write_video_dir(OUT, video)
    print(f"wrote {video.shape[0]} generated frames to {OUT}")


if __name__ == "__main__":
    main()
