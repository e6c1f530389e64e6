"""Bias-corrected Adam on named parameter dictionaries."""

from __future__ import annotations

import numpy as np

__all__ = ["GradientError", "adam_step"]


class GradientError(RuntimeError):
    """Raised when an update would apply non-finite gradients."""


def adam_step(model, grads: dict, lr: float, beta1: float, beta2: float, eps: float = 1e-8):
    """Standard Adam update, applied in place; returns the model.

    Aborts (raising GradientError) before touching any state if a gradient
    contains NaN/inf, so a failed step never corrupts the model.
    """
    params = model.params
    if set(grads) != set(params):
        raise ValueError("gradient keys do not match parameter keys")
    for name, g in grads.items():
        if g.shape != params[name].shape:
            raise ValueError(f"gradient shape mismatch for {name}")
        if not np.all(np.isfinite(g)):
            raise GradientError(f"non-finite gradient in {name}")
    model.step_count += 1
    t = model.step_count
    correction1 = 1.0 - beta1**t
    correction2 = 1.0 - beta2**t
    for name, g in grads.items():
        p = params[name]
        g = g.astype(p.dtype, copy=False)
        m = model.adam_m[name]
        v = model.adam_v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        m_hat = m / correction1
        v_hat = v / correction2
        p -= (lr * m_hat / (np.sqrt(v_hat) + eps)).astype(p.dtype, copy=False)
    return model
