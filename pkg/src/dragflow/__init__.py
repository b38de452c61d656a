"""dragflow: trajectory-conditioned video diffusion on synthetic sprite scenes.

A small, CPU-only stack: a tape-based autodiff engine over float64 numpy
arrays, a trajectory sampler that turns dense optical flow into sparse
Gaussian-enhanced motion maps, multiscale condition fusion inside a video
UNet, and a two-stage training loop, plus dataset generation, evaluation
metrics, a CLI, and an HTTP generation service.
"""

__version__ = "0.1.0"
