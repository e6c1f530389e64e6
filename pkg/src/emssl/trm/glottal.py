"""Glottal excitation for the tube synthesizer.

The voiced source is a parametric rise/fall pulse: a raised-cosine rise over
the fraction ``tp`` of each period followed by a raised-cosine fall whose
length interpolates between ``tnMax`` (soft voice) and ``tnMin`` (loud voice)
with the instantaneous glottal amplitude.  Each completed period is re-centred
to zero mean so the source carries no DC into the waveguide.
"""

from __future__ import annotations

import numpy as np

from .params import REFERENCE_PITCH_HZ, UtteranceParams

__all__ = ["glottal_source", "pulse_train", "pulse_shape"]


def pulse_shape(phase: np.ndarray, tp: float, tn: np.ndarray | float) -> np.ndarray:
    """Evaluate the raw (non-centred) pulse at phase in [0, 1)."""
    phase = np.asarray(phase, dtype=float)
    tn = np.asarray(tn, dtype=float)
    rise = 0.5 * (1.0 - np.cos(np.pi * np.minimum(phase, tp) / tp))
    fall_phase = np.clip((phase - tp) / np.maximum(tn, 1e-9), 0.0, 1.0)
    fall = 0.5 * (1.0 + np.cos(np.pi * fall_phase))
    return np.where(phase < tp, rise, fall)


def pulse_train(
    phase: np.ndarray,
    tp: float,
    tn: np.ndarray | float,
    *,
    sine: bool = False,
) -> np.ndarray:
    """Pulse train from an accumulated phase signal, zero-mean per period.

    `phase` is monotonically increasing in period units (wraps implied by the
    fractional part).  Every complete period has its sample mean removed; a
    trailing partial period is centred with the analytic pulse mean instead.
    """
    phase = np.asarray(phase, dtype=float)
    if sine:
        return np.sin(2.0 * np.pi * phase)
    frac = phase - np.floor(phase)
    raw = pulse_shape(frac, tp, tn)
    out = raw.copy()
    period_idx = np.floor(phase).astype(np.int64)
    # mean-correct each complete period
    boundaries = np.flatnonzero(np.diff(period_idx)) + 1
    start = 0
    for stop in boundaries:
        out[start:stop] -= np.mean(raw[start:stop])
        start = stop
    if start < out.size:
        # analytic mean of the raised-cosine pulse: (tp + tn) / 2
        tn_tail = tn if np.isscalar(tn) else np.asarray(tn)[start:]
        out[start:] -= 0.5 * (tp + np.mean(tn_tail))
    return out


def glottal_source(
    u: UtteranceParams,
    pitch_hz: float,
    n_samples: int,
    *,
    sample_rate_hz: float | None = None,
    seed: int = 0,
) -> np.ndarray:
    """Constant-pitch glottal source of `n_samples` samples.

    The pulse train is mixed with white noise at the breathiness percentage.
    Raises on pitch outside [40, 600] Hz.
    """
    if not (40.0 <= pitch_hz <= 600.0):
        raise ValueError(f"pitch must lie in [40, 600] Hz, got {pitch_hz}")
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    sr = float(sample_rate_hz if sample_rate_hz is not None else u.sample_rate_hz)
    phase = np.arange(n_samples) * (pitch_hz / sr)
    # full-amplitude source: fall time at tnMin
    pulse = pulse_train(
        phase,
        u.glottal_pulse_tp,
        u.glottal_pulse_tn_min,
        sine=(u.glottal_waveform == 1),
    )
    b = u.breathiness_pct / 100.0
    if b <= 0.0:
        return pulse
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(n_samples)
    # match noise power to the pulse so the mix ratio is meaningful
    pulse_rms = float(np.sqrt(np.mean(pulse**2)))
    noise *= pulse_rms if pulse_rms > 0 else 0.3
    return (1.0 - b) * pulse + b * noise
