"""Noise schedule, forward corruption, two-stage training, and ancestral
sampling with classifier-free guidance.

Stage 1 conditions on dense flow (no Gaussian enhancement) routed through the
trajectory-condition encoder; stage 2 swaps in sampled sparse trajectory
maps. Both stages randomly drop each control so the trained model supports
any condition combination, which guidance exploits at sampling time.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .conditions import DropRatios, drop_conditions
from .model import VideoModel, save_model
from .optim import Adam
from .tensor import Tensor, backward, mean_all, no_grad, power, reset_tape, sub
from .trajectory import SamplerConfig, sample_trajectory_map


class DiffusionError(RuntimeError):
    pass


STAGE_DENSE_FLOW = "dense_flow"
STAGE_SPARSE_TRAJECTORY = "sparse_trajectory"


# ---------------------------------------------------------------------------
# schedule and forward process


@dataclass(frozen=True)
class NoiseSchedule:
    betas: np.ndarray
    alphas: np.ndarray
    alpha_bars: np.ndarray

    @property
    def timesteps(self) -> int:
        return len(self.betas)

    def __post_init__(self):
        b, a, ab = self.betas, self.alphas, self.alpha_bars
        if not (len(b) == len(a) == len(ab)) or len(b) < 1:
            raise DiffusionError("schedule arrays must share a positive length")
        if np.any(b <= 0) or np.any(b >= 1):
            raise DiffusionError("betas must lie strictly inside (0, 1)")
        if np.any(np.diff(ab) >= 0):
            raise DiffusionError("cumulative signal level must strictly decrease")

    def alpha_bar(self, t: int) -> float:
        """Cumulative signal fraction at step t, with t in [1, T]."""
        if not (1 <= t <= self.timesteps):
            raise DiffusionError(f"t={t} outside [1, {self.timesteps}]")
        return float(self.alpha_bars[t - 1])


def make_schedule(timesteps: int, beta_start: float = 1e-4, beta_end: float = 2e-2) -> NoiseSchedule:
    if timesteps < 1:
        raise DiffusionError(f"timesteps must be >= 1, got {timesteps}")
    if not (0.0 < beta_start <= beta_end < 1.0):
        raise DiffusionError(
            f"need 0 < beta_start <= beta_end < 1, got ({beta_start}, {beta_end})"
        )
    betas = np.linspace(beta_start, beta_end, timesteps, dtype=np.float64)
    alphas = 1.0 - betas
    return NoiseSchedule(betas=betas, alphas=alphas, alpha_bars=np.cumprod(alphas))


def schedule_for(model: VideoModel) -> NoiseSchedule:
    cfg = model.config
    return make_schedule(cfg.timesteps, cfg.beta_start, cfg.beta_end)


def forward_diffuse(x0: np.ndarray, t: int, eps: np.ndarray, schedule: NoiseSchedule) -> np.ndarray:
    """Corrupt clean data to step t: sqrt(a)*x0 + sqrt(1-a)*eps."""
    x0 = np.asarray(x0, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    if eps.shape != x0.shape:
        raise DiffusionError(f"noise shape {eps.shape} != data shape {x0.shape}")
    ab = schedule.alpha_bar(t)
    return np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * eps


# ---------------------------------------------------------------------------
# training losses


@dataclass(frozen=True)
class TrainStageConfig:
    stage: str
    steps: int
    batch_size: int = 1
    learning_rate: float = 1e-3
    drop: DropRatios = field(default_factory=DropRatios)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)

    def __post_init__(self):
        if self.stage not in (STAGE_DENSE_FLOW, STAGE_SPARSE_TRAJECTORY):
            raise DiffusionError(
                f"stage must be {STAGE_DENSE_FLOW!r} or {STAGE_SPARSE_TRAJECTORY!r}, got {self.stage!r}"
            )
        if self.steps < 0 or self.batch_size < 1 or self.learning_rate <= 0:
            raise DiffusionError(
                f"bad stage config: steps={self.steps}, batch={self.batch_size}, lr={self.learning_rate}"
            )


def _motion_condition(sample, stage_cfg: TrainStageConfig, rng: np.random.Generator) -> np.ndarray:
    flow = getattr(sample, "flow", None)
    if flow is None:
        raise DiffusionError("training sample is missing its ground-truth flow")
    if stage_cfg.stage == STAGE_DENSE_FLOW:
        return flow.frames
    tmap = sample_trajectory_map(
        flow, stage_cfg.sampler.anchor, stage_cfg.sampler.kernel_size, stage_cfg.sampler.sigma, rng
    )
    return tmap.grid


def _sample_loss(sample, model: VideoModel, schedule: NoiseSchedule,
                 stage_cfg: TrainStageConfig, rng: np.random.Generator,
                 apply_drop: bool) -> Tensor:
    """Noise-matching MSE for one video, with per-sample (t, eps) draws."""
    pixels = np.asarray(sample.pixels, dtype=np.float64)
    x0 = model.codec.encode(pixels)
    t = int(rng.integers(1, schedule.timesteps + 1))
    eps = rng.standard_normal(x0.shape)
    x_t = forward_diffuse(x0, t, eps, schedule)
    motion = _motion_condition(sample, stage_cfg, rng)
    conds = model.encode_conditions(pixels[0], motion, sample.caption)
    if apply_drop:
        conds = drop_conditions(conds, stage_cfg.drop, rng, model.null_text())
    eps_hat = model.predict_noise(Tensor(x_t), t, conds)
    return mean_all(power(sub(eps_hat, Tensor(eps)), 2))


def _batch_loss(batch, model, schedule, stage_cfg, rng, apply_drop=True) -> Tensor:
    if not batch:
        raise DiffusionError("empty training batch")
    total = _sample_loss(batch[0], model, schedule, stage_cfg, rng, apply_drop)
    for sample in batch[1:]:
        total = total + _sample_loss(sample, model, schedule, stage_cfg, rng, apply_drop)
    return total * (1.0 / len(batch))


def training_loss_stage1(batch, model: VideoModel, schedule: NoiseSchedule,
                         rng: np.random.Generator, drop: DropRatios | None = None) -> Tensor:
    """Dense-flow conditioning; no trajectory sampling, no enhancement."""
    cfg = TrainStageConfig(
        stage=STAGE_DENSE_FLOW, steps=0, drop=drop or DropRatios(0.0, 0.0, 0.0)
    )
    return _batch_loss(batch, model, schedule, cfg, rng, apply_drop=drop is not None)


def training_loss_stage2(batch, model: VideoModel, schedule: NoiseSchedule,
                         sampler: SamplerConfig, rng: np.random.Generator,
                         drop: DropRatios | None = None) -> Tensor:
    """Sparse-trajectory conditioning via the trajectory sampler."""
    cfg = TrainStageConfig(
        stage=STAGE_SPARSE_TRAJECTORY, steps=0, sampler=sampler,
        drop=drop or DropRatios(0.0, 0.0, 0.0),
    )
    return _batch_loss(batch, model, schedule, cfg, rng, apply_drop=drop is not None)


# ---------------------------------------------------------------------------
# the two-stage training driver


def write_loss_trace(path, trace) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "stage", "loss"])
        for step, stage, loss in trace:
            writer.writerow([step, stage, f"{loss:.10g}"])


def adaptive_train(
    model: VideoModel,
    dataset,
    stage1: TrainStageConfig,
    stage2: TrainStageConfig,
    rng: np.random.Generator,
    trace_path=None,
    checkpoint_dir=None,
    checkpoint_every: int = 0,
    log=None,
):
    """Run dense-flow steps, then sparse-trajectory steps, with Adam.

    ``dataset`` is an iterator of batches (lists of samples with .pixels,
    .caption, .flow). Returns (model, trace) where trace rows are
    (step, stage, loss). Optimizer moments persist across the stage switch.
    """
    if stage1.stage != STAGE_DENSE_FLOW or stage2.stage != STAGE_SPARSE_TRAJECTORY:
        raise DiffusionError(
            f"stage order is {STAGE_DENSE_FLOW} then {STAGE_SPARSE_TRAJECTORY}, "
            f"got ({stage1.stage!r}, {stage2.stage!r})"
        )
    data_iter = iter(dataset)
    schedule = schedule_for(model)
    opt = Adam(model.parameters(), lr=stage1.learning_rate)
    trace = []
    step = 0
    for stage_cfg in (stage1, stage2):
        opt.lr = stage_cfg.learning_rate
        for _ in range(stage_cfg.steps):
            batch = next(data_iter)
            reset_tape()
            opt.zero_grad()
            loss = _batch_loss(batch, model, schedule, stage_cfg, rng, apply_drop=True)
            value = float(loss.item())
            if not np.isfinite(value):
                raise DiffusionError(f"non-finite loss at step {step}")
            backward(loss)
            opt.step()
            trace.append((step, stage_cfg.stage, value))
            if log is not None:
                log(step, stage_cfg.stage, value)
            step += 1
            if checkpoint_dir and checkpoint_every and step % checkpoint_every == 0:
                save_model(model, Path(checkpoint_dir) / f"step_{step:06d}.drgf")
    reset_tape()
    if trace_path is not None:
        write_loss_trace(trace_path, trace)
    return model, trace


# ---------------------------------------------------------------------------
# ancestral sampling with classifier-free guidance


def sample(
    model: VideoModel,
    conds,
    schedule: NoiseSchedule,
    rng: np.random.Generator,
    guidance: float = 3.0,
    progress=None,
) -> np.ndarray:
    """Reverse diffusion from pure noise; returns (L, 3, H, W) pixels in [0, 1].

    The noise estimate blends the unconditional and conditional branches:
    eps = eps_uncond + guidance * (eps_cond - eps_uncond), so guidance 0 is
    purely unconditional and guidance 1 purely conditional.
    """
    if guidance < 0:
        raise DiffusionError(f"guidance must be >= 0, got {guidance}")
    cfg = model.config
    shape = (cfg.frames, 3, cfg.height, cfg.width)
    x = rng.standard_normal(shape)
    null = model.null_conditions()
    T = schedule.timesteps
    with no_grad():
        for t in range(T, 0, -1):
            xt = Tensor(x)
            eps_u = model.predict_noise(xt, t, null).data
            if guidance == 0.0:
                eps_hat = eps_u
            else:
                eps_c = model.predict_noise(xt, t, conds).data
                eps_hat = eps_u + guidance * (eps_c - eps_u)
            beta = float(schedule.betas[t - 1])
            alpha = float(schedule.alphas[t - 1])
            ab_t = float(schedule.alpha_bars[t - 1])
            mean = (x - beta / np.sqrt(1.0 - ab_t) * eps_hat) / np.sqrt(alpha)
            if t > 1:
                ab_prev = float(schedule.alpha_bars[t - 2])
                var = (1.0 - ab_prev) / (1.0 - ab_t) * beta
                x = mean + np.sqrt(var) * rng.standard_normal(shape)
            else:
                x = mean
            if progress is not None:
                progress(T - t + 1, T)
    return model.codec.decode(x)
