"""Full video model: caption encoder, condition encoders, fusion UNet, and
a pixel codec, plus config/weights persistence.

The codec maps pixels in [0, 1] to the symmetric [-1, 1] range the diffusion
process operates in. The default codec is the identity affine map; anything
with the same encode/decode contract can stand in.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .conditions import (
    ConditionError,
    ConditionSet,
    FrameEncoder,
    Module,
    TextEmbedding,
    TextEncoder,
    Vocabulary,
    build_pyramid,
    encode_image_condition,
    encode_trajectory_condition,
    first_frame_mask,
    load_vocabulary,
    save_vocabulary,
)
from .tensor import ShapeError, Tensor
from .unet import UNet, UNetConfig


@dataclass(frozen=True)
class ModelConfig:
    levels: int = 3
    channels: tuple = (32, 64, 128)
    frames: int = 8
    height: int = 32
    width: int = 32
    vocab_size: int = 32
    text_length: int = 16
    text_dim: int = 64
    image_cond_channels: int = 16
    trajectory_cond_channels: int = 16
    cond_hidden: int = 16
    heads: int = 2
    time_dim: int = 64
    timesteps: int = 100
    beta_start: float = 1e-4
    beta_end: float = 2e-2

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(int(c) for c in self.channels))
        if self.frames < 2:
            raise ConditionError(f"need at least 2 frames, got {self.frames}")
        if self.vocab_size < 1 or self.text_length < 1:
            raise ConditionError("vocab_size and text_length must be positive")
        if self.timesteps < 1:
            raise ConditionError(f"timesteps must be >= 1, got {self.timesteps}")

    def to_json(self) -> str:
        d = asdict(self)
        d["channels"] = list(self.channels)
        return json.dumps(d, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ModelConfig":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConditionError(f"bad model config JSON: {e}") from None
        if not isinstance(d, dict):
            raise ConditionError("model config must be a JSON object")
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConditionError(f"unknown model config keys: {unknown}")
        return cls(**d)

    def unet_config(self) -> UNetConfig:
        return UNetConfig(
            levels=self.levels,
            channels=self.channels,
            frames=self.frames,
            height=self.height,
            width=self.width,
            in_channels=3,
            image_cond_channels=self.image_cond_channels,
            trajectory_cond_channels=self.trajectory_cond_channels,
            text_dim=self.text_dim,
            heads=self.heads,
            time_dim=self.time_dim,
        )


class IdentityCodec:
    """Affine pixel codec: encode p -> 2p - 1, decode x -> clamp((x+1)/2)."""

    def encode(self, pixels: np.ndarray) -> np.ndarray:
        return 2.0 * np.asarray(pixels, dtype=np.float64) - 1.0

    def decode(self, x: np.ndarray) -> np.ndarray:
        return np.clip((np.asarray(x, dtype=np.float64) + 1.0) / 2.0, 0.0, 1.0)


class VideoModel(Module):
    """Everything needed to turn (noisy video, t, conditions) into a noise
    estimate, and to encode raw inputs into those conditions."""

    def __init__(self, config: ModelConfig, vocab: Vocabulary, rng: np.random.Generator):
        super().__init__("model")
        if len(vocab) != config.vocab_size:
            raise ConditionError(
                f"vocabulary size {len(vocab)} != config vocab_size {config.vocab_size}"
            )
        self.config = config
        self.vocab = vocab
        self.codec = IdentityCodec()
        self.text = self.child(
            TextEncoder("model.text", config.vocab_size, config.text_length, config.text_dim, rng)
        )
        self.image_enc = self.child(
            FrameEncoder("model.image_enc", 3, config.cond_hidden, config.image_cond_channels, 0, rng)
        )
        self.traj_enc = self.child(
            FrameEncoder("model.traj_enc", 2, config.cond_hidden, config.trajectory_cond_channels, 0, rng)
        )
        self.unet = self.child(UNet("model.unet", config.unet_config(), rng))

    # -- conditions ---------------------------------------------------------

    def encode_caption(self, caption: str, lenient: bool = False) -> TextEmbedding:
        """Encode a caption; lenient mode maps unknown words to padding."""
        if lenient:
            ids, _ = self.vocab.encode_lenient(caption)
        else:
            ids = self.vocab.encode(caption)
        return self.text.encode(ids)

    def null_text(self) -> TextEmbedding:
        """Encoding of the empty caption (all padding tokens)."""
        return self.text.encode([])

    def encode_conditions(self, first_frame: np.ndarray, motion: np.ndarray, caption: str,
                          lenient: bool = False) -> ConditionSet:
        """Encode raw controls for one video.

        first_frame: (3, H, W) pixels in [0, 1]; motion: (L-1, 2, H, W) flow
        displacements, either dense flow or an enhanced trajectory map.
        """
        cfg = self.config
        first_frame = np.asarray(first_frame, dtype=np.float64)
        motion = np.asarray(motion, dtype=np.float64)
        if first_frame.shape != (3, cfg.height, cfg.width):
            raise ShapeError(
                f"first frame {first_frame.shape} != (3, {cfg.height}, {cfg.width})"
            )
        if motion.shape != (cfg.frames - 1, 2, cfg.height, cfg.width):
            raise ShapeError(
                f"motion grid {motion.shape} != "
                f"({cfg.frames - 1}, 2, {cfg.height}, {cfg.width})"
            )
        image = encode_image_condition(
            Tensor(self.codec.encode(first_frame)), cfg.frames, self.image_enc
        )
        trajectory = encode_trajectory_condition(Tensor(motion), self.traj_enc)
        return ConditionSet(
            text=self.encode_caption(caption, lenient=lenient),
            image=image,
            trajectory=trajectory,
            mask=first_frame_mask(cfg.frames),
        )

    def null_conditions(self) -> ConditionSet:
        """The fully dropped set: empty caption, zero codes, zero mask."""
        cfg = self.config
        shape_s = (cfg.frames, cfg.image_cond_channels, cfg.height, cfg.width)
        shape_g = (cfg.frames, cfg.trajectory_cond_channels, cfg.height, cfg.width)
        return ConditionSet(
            text=self.null_text(),
            image=Tensor(np.zeros(shape_s)),
            trajectory=Tensor(np.zeros(shape_g)),
            mask=np.zeros(cfg.frames),
            dropped_text=True,
            dropped_image=True,
            dropped_trajectory=True,
        )

    # -- noise prediction ----------------------------------------------------

    def predict_noise(self, x: Tensor, t: int, conds: ConditionSet) -> Tensor:
        pyramid = build_pyramid(conds.image, conds.trajectory, conds.mask, self.config.levels)
        return self.unet(x, t, pyramid, conds.text)


# ---------------------------------------------------------------------------
# persistence: weights file plus sibling config JSON and vocabulary


def _config_path(path: Path) -> Path:
    return path.with_suffix(".json")


def _vocab_path(path: Path) -> Path:
    return path.with_suffix(".vocab")


def save_model(model: VideoModel, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(path, model.state_dict())
    _config_path(path).write_text(model.config.to_json(), encoding="utf-8")
    save_vocabulary(_vocab_path(path), model.vocab)


def load_model(path) -> VideoModel:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    cfg_path = _config_path(path)
    if not cfg_path.exists():
        raise FileNotFoundError(f"model config not found: {cfg_path}")
    config = ModelConfig.from_json(cfg_path.read_text(encoding="utf-8"))
    vocab = load_vocabulary(_vocab_path(path))
    model = VideoModel(config, vocab, rng=np.random.default_rng(0))
    model.load_state_dict(load_checkpoint(path))
    return model
