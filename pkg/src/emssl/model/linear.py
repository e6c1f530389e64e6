"""Minimal linear regressor for vector-valued inverse problems.

Implements the same training protocol as the speech network (named params,
Adam state, make_batch / loss_and_grad / infer) for observations that are
single-frame vectors, e.g. the toy linear benchmark.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass

import numpy as np

from .network import LossBreakdown

__all__ = ["LinearConfig", "LinearRegressor"]


@dataclass(frozen=True)
class LinearConfig:
    d_in: int
    d_out: int
    seed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "LinearConfig":
        return cls(**d)

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


class LinearRegressor:
    """z = W x + b with hand-written gradients."""

    model_class = "linear"

    def __init__(self, config: LinearConfig, params: dict[str, np.ndarray]):
        self.config = config
        self.params = params
        self.adam_m = {k: np.zeros_like(v) for k, v in params.items()}
        self.adam_v = {k: np.zeros_like(v) for k, v in params.items()}
        self.step_count = 0

    @classmethod
    def initialize(cls, config: LinearConfig, dtype=np.float32) -> "LinearRegressor":
        rng = np.random.default_rng(config.seed)
        bound = 1.0 / np.sqrt(config.d_in)
        params = {
            "w": rng.uniform(-bound, bound, size=(config.d_out, config.d_in)).astype(dtype),
            "b": np.zeros(config.d_out, dtype=dtype),
        }
        return cls(config, params)

    def n_parameters(self) -> int:
        return sum(v.size for v in self.params.values())

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1)
        return self.params["w"] @ x + self.params["b"]

    def infer(self, observation):
        values = observation.values if hasattr(observation, "values") else observation
        return self.forward(values), None

    def make_batch(self, samples):
        xs, zs = [], []
        for obs, z in samples:
            values = obs.values if hasattr(obs, "values") else np.asarray(obs)
            glob, frames = z
            if frames is not None:
                raise ValueError("linear regressor has no per-frame targets")
            xs.append(np.asarray(values, dtype=float).reshape(-1))
            zs.append(np.asarray(glob, dtype=float))
        return {"x": np.stack(xs), "target": np.stack(zs)}

    def loss_and_grad(self, batch, weight: float):
        x = batch["x"]
        target = batch["target"]
        pred = x @ self.params["w"].T + self.params["b"]
        if pred.shape != target.shape:
            raise ValueError(f"target shape {target.shape} != prediction {pred.shape}")
        err = pred - target
        loss = float(np.mean(err**2))
        d = 2.0 * err / err.size
        grads = {"w": d.T @ x, "b": d.sum(axis=0)}
        return LossBreakdown(utterance=loss, control=0.0, weight=weight), grads
