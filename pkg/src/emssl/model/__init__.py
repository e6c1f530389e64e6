"""Inference network, optimizer, and checkpoint I/O."""

from .adam import GradientError, adam_step
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .config import PRESETS, ModelConfig, preset_config
from .linear import LinearConfig, LinearRegressor
from .network import LossBreakdown, RegressorModel, init_model

__all__ = [
    "PRESETS",
    "CheckpointError",
    "GradientError",
    "LinearConfig",
    "LinearRegressor",
    "LossBreakdown",
    "ModelConfig",
    "RegressorModel",
    "adam_step",
    "init_model",
    "load_checkpoint",
    "preset_config",
    "save_checkpoint",
]
