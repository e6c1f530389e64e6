"""Input validation helpers shared across the package.

Small, estimator-friendly checks in the spirit of sklearn's utils.validation,
specialised for the data this package passes around (waveforms, spectrogram
arrays, parameter vectors).
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "check_finite",
    "check_positive",
    "check_in_range",
    "check_2d",
    "check_same_shape",
    "as_float_array",
]


def check_finite(value, name: str):
    """Raise ValueError if `value` (scalar or array) contains NaN/inf."""
    arr = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite, got {value!r}")
    return value


def check_positive(value: float, name: str, strict: bool = True) -> float:
    if strict and not value > 0:
        raise ValueError(f"{name} must be > 0, got {value!r}")
    if not strict and not value >= 0:
        raise ValueError(f"{name} must be >= 0, got {value!r}")
    return value


def check_in_range(value: float, lo: float, hi: float, name: str) -> float:
    if not (lo <= value <= hi):
        raise ValueError(f"{name} must lie in [{lo}, {hi}], got {value!r}")
    return value


def as_float_array(x, name: str, *, dtype=np.float64) -> np.ndarray:
    """Convert to a contiguous float array, rejecting non-numeric input."""
    try:
        arr = np.ascontiguousarray(x, dtype=dtype)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"{name} must be numeric array-like: {exc}") from exc
    return arr


def check_2d(x, name: str, *, n_cols: int | None = None) -> np.ndarray:
    arr = as_float_array(x, name)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if n_cols is not None and arr.shape[1] != n_cols:
        raise ValueError(f"{name} must have {n_cols} columns, got {arr.shape[1]}")
    return arr


def check_same_shape(a: np.ndarray, b: np.ndarray, names: str = "arrays"):
    if a.shape != b.shape:
        raise ValueError(f"{names} must have identical shapes: {a.shape} vs {b.shape}")
