"""Show the closed-form noising process on a rendered sprite video.

Frames are mapped to [-1, 1], mixed with Gaussian noise at a few timesteps of
the variance schedule, then mapped back and written as PNG strips so you can
watch the signal drown.

Run:  python3 demos/forward_diffusion.py
"""

from pathlib import Path

import numpy as np

from dragflow.diffusion import forward_diffuse, make_schedule
from dragflow.model import IdentityCodec
from dragflow.scenes import LinearMotion, SceneSpec, SpriteSpec, render_scene
from dragflow.video_io import write_video_dir

OUT = Path(__file__).resolve().parent / "out" / "forward_diffusion"


def main():
    rng = np.random.default_rng(0)
    scene = SceneSpec(width=32, height=32, frames=8, sprites=[
        SpriteSpec(shape="square", color=4, size=9.0, start=(10.0, 16.0),
                   motion=LinearMotion(velocity=(1.5, 0.0)))])
    video = render_scene(scene)

    codec = IdentityCodec()
    x0 = codec.encode(video)
    sched = make_schedule(timesteps=100)

    for t in (1, 25, 50, 100):
        eps = rng.standard_normal(x0.shape)
        x_t = forward_diffuse(x0, t, eps, sched)
        ab = sched.alpha_bar(t)
        snr = ab / (1.0 - ab)
        print(f"t={t:3d}  alpha_bar={ab:.5f}  snr={snr:9.3f}  "
              f"pixel range [{x_t.min():+.2f}, {x_t.max():+.2f}]")
        write_video_dir(OUT / f"t_{t:03d}", codec.decode(x_t))
    print(f"wrote frame strips under {OUT}")


if __name__ == "__main__":
    main()
