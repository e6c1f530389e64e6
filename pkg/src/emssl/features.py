"""Waveform -> 80-bin log-mel spectrograms, the observation space.

Fixed analysis setup: 16 kHz audio, 50 ms Hann window (800 samples), 12.5 ms
hop (200 samples), 1024-point FFT, reflection padding, 80 peak-normalized
triangular mel filters over 0-8 kHz, natural log with a 1e-5 floor.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .trm.params import Waveform
from .validation import check_2d, check_finite

__all__ = [
    "MelSpectrogram",
    "FRAME_LENGTH",
    "HOP_LENGTH",
    "FFT_SIZE",
    "N_MELS",
    "LOG_FLOOR",
    "FRAME_RATE_HZ",
    "AUDIO_RATE_HZ",
    "resample",
    "stft_magnitude",
    "mel_filterbank",
    "log_mel",
    "hz_to_mel",
    "mel_to_hz",
]

AUDIO_RATE_HZ = 16000.0
FRAME_LENGTH = 800       # 50 ms
HOP_LENGTH = 200         # 12.5 ms
FFT_SIZE = 1024
N_MELS = 80
LOG_FLOOR = 1e-5
FRAME_RATE_HZ = AUDIO_RATE_HZ / HOP_LENGTH  # 80 frames/s


@dataclass
class MelSpectrogram:
    """N frames x 80 log-magnitude mel bins."""

    values: np.ndarray
    sample_rate_hz: float = AUDIO_RATE_HZ
    frame_shift_s: float = HOP_LENGTH / AUDIO_RATE_HZ
    frame_length_s: float = FRAME_LENGTH / AUDIO_RATE_HZ

    def __post_init__(self):
        self.values = check_2d(self.values, "mel values", n_cols=N_MELS)
        if self.values.shape[0] < 1:
            raise ValueError("mel spectrogram needs at least one frame")
        check_finite(self.values, "mel values")

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]

    def to_csv(self) -> str:
        lines = [",".join(f"mel{i}" for i in range(N_MELS))]
        for row in self.values:
            lines.append(",".join(f"{v:.9g}" for v in row))
        return "\n".join(lines) + "\n"


def resample(w: Waveform, target_hz: float, *, n_out: int | None = None) -> Waveform:
    """Band-limited windowed-sinc resampling at an arbitrary real ratio.

    Same-rate input is returned unchanged.  Each output sample is a
    Kaiser-windowed sinc interpolation of its input neighbourhood, with the
    kernel lowpassed at the narrower of the two Nyquist limits and weights
    renormalized per sample so DC is preserved exactly.
    """
    if w.sample_rate_hz <= 0 or target_hz <= 0:
        raise ValueError("sample rates must be > 0")
    if w.samples.size == 0:
        raise ValueError("cannot resample an empty waveform")
    if abs(target_hz - w.sample_rate_hz) < 1e-12 and n_out is None:
        return Waveform(sample_rate_hz=w.sample_rate_hz, samples=w.samples.copy())

    ratio = target_hz / w.sample_rate_hz
    if n_out is None:
        n_out = max(1, int(round(w.samples.size * ratio)))
    half = 24  # one-sided kernel support in input samples
    cutoff = 0.92 * min(1.0, ratio)  # fraction of input Nyquist

    src_pos = np.arange(n_out) / ratio           # output times in input units
    base = np.floor(src_pos).astype(np.int64)
    offs = np.arange(-half + 1, half + 1)
    idx = np.clip(base[:, None] + offs[None, :], -half, w.samples.size - 1 + half)
    dist = src_pos[:, None] - idx                # in (-half, half]
    kernel = cutoff * np.sinc(cutoff * dist)
    u = np.pi * dist / half
    window = 0.42 + 0.5 * np.cos(u) + 0.08 * np.cos(2.0 * u)  # Blackman
    weights = kernel * window
    weights /= weights.sum(axis=1, keepdims=True)

    padded = np.pad(w.samples, (half, half), mode="edge")
    out = np.einsum("ij,ij->i", weights, padded[idx + half])
    return Waveform(sample_rate_hz=target_hz, samples=out)


def stft_magnitude(w: Waveform) -> np.ndarray:
    """Hann-window magnitude STFT: N x 513 with N = ceil(len / hop).

    The signal is reflection-padded by half a window on each side so frame t
    is centred on sample t * hop.
    """
    if abs(w.sample_rate_hz - AUDIO_RATE_HZ) > 1e-6:
        raise ValueError(f"expected {AUDIO_RATE_HZ:.0f} Hz input, got {w.sample_rate_hz}")
    x = np.asarray(w.samples, dtype=np.float64)
    if x.size == 0:
        raise ValueError("cannot analyse an empty waveform")
    n_frames = int(np.ceil(x.size / HOP_LENGTH))
    pad = FRAME_LENGTH // 2
    if x.size == 1:
        padded = np.full(1 + 2 * pad, x[0])
    else:
        padded = np.pad(x, (pad, pad), mode="reflect", reflect_type="odd")
    need = (n_frames - 1) * HOP_LENGTH + FRAME_LENGTH
    if padded.size < need:
        padded = np.pad(padded, (0, need - padded.size), mode="edge")
    starts = np.arange(n_frames) * HOP_LENGTH
    frames = padded[starts[:, None] + np.arange(FRAME_LENGTH)[None, :]]
    window = np.hanning(FRAME_LENGTH)
    spec = np.fft.rfft(frames * window, n=FFT_SIZE, axis=1)
    return np.abs(spec)


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=float) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=float) / 2595.0) - 1.0)


@lru_cache(maxsize=1)
def _cached_filterbank() -> np.ndarray:
    edges = mel_to_hz(np.linspace(hz_to_mel(0.0), hz_to_mel(8000.0), N_MELS + 2))
    bins = np.arange(FFT_SIZE // 2 + 1) * AUDIO_RATE_HZ / FFT_SIZE
    fbank = np.zeros((N_MELS, FFT_SIZE // 2 + 1))
    for j in range(N_MELS):
        lo, mid, hi = edges[j], edges[j + 1], edges[j + 2]
        left = (bins - lo) / (mid - lo)
        right = (hi - bins) / (hi - mid)
        fbank[j] = np.maximum(0.0, np.minimum(left, right))
        peak = fbank[j].max()
        if peak > 0:
            fbank[j] /= peak
    fbank.setflags(write=False)
    return fbank


def mel_filterbank() -> np.ndarray:
    """80 x 513 matrix of peak-normalized triangles, centers equally spaced
    on the mel scale between 0 and 8 kHz.  Computed once and shared."""
    return _cached_filterbank()


def log_mel(w: Waveform) -> MelSpectrogram:
    """Natural-log mel magnitudes, floored at 1e-5."""
    mag = stft_magnitude(w)
    mel = mag @ mel_filterbank().T
    return MelSpectrogram(values=np.log(np.maximum(mel, LOG_FLOOR)))
