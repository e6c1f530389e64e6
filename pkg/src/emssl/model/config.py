"""Architecture configuration for the inference network."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field

__all__ = ["ModelConfig", "PRESETS"]

N_CONTROL_OUT = 16
N_UTTERANCE_OUT = 13
MEL_BINS = 80


@dataclass(frozen=True)
class ModelConfig:
    """Fully determines the layer list of the mel -> parameters network.

    `conv_channels` lists the down-path widths; the first entry is the stem
    width, each later entry is one stride-2 level (mirrored by the up path
    with skip connections).  `hidden_size` is the per-direction width of the
    bidirectional recurrent layer on top.
    """

    preset: str = "desk"
    conv_channels: tuple = (16, 24)
    hidden_size: int = 32
    kernel_width: int = 3
    seed: int = 0
    mel_mean: float = -6.0
    mel_std: float = 3.0

    def __post_init__(self):
        if self.kernel_width % 2 != 1:
            raise ValueError("kernel_width must be odd")
        if len(self.conv_channels) < 1:
            raise ValueError("conv_channels needs at least the stem width")
        if self.hidden_size < 1:
            raise ValueError("hidden_size must be >= 1")

    @property
    def depth(self) -> int:
        """Number of stride-2 levels."""
        return len(self.conv_channels) - 1

    @property
    def min_frames(self) -> int:
        return max(1, 2**self.depth)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["conv_channels"] = list(self.conv_channels)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        d["conv_channels"] = tuple(d["conv_channels"])
        return cls(**d)

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


PRESETS: dict[str, ModelConfig] = {
    "desk": ModelConfig(preset="desk", conv_channels=(16, 24), hidden_size=32),
    "paper": ModelConfig(preset="paper", conv_channels=(32, 64, 128), hidden_size=128),
}


def preset_config(name: str, seed: int = 0) -> ModelConfig:
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    base = PRESETS[name]
    return ModelConfig(
        preset=base.preset,
        conv_channels=base.conv_channels,
        hidden_size=base.hidden_size,
        kernel_width=base.kernel_width,
        seed=seed,
        mel_mean=base.mel_mean,
        mel_std=base.mel_std,
    )
