"""Similarity metrics between reference and synthetic mel-spectrograms.

Sentence SNR pools squared error over a whole utterance; local SNR scores
each time-frequency point.  Degenerate ratios are capped at +/-120 dB so the
metrics stay bounded and order-preserving.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .features import MelSpectrogram, N_MELS
from .validation import check_same_shape

__all__ = [
    "SNR_CAP_DB",
    "BinSnrStats",
    "sentence_snr",
    "local_snr",
    "bin_snr_stats",
    "corpus_snr",
]

SNR_CAP_DB = 120.0
TRUNCATE_LO = -20.0
TRUNCATE_HI = 60.0


def _values(m) -> np.ndarray:
    return m.values if isinstance(m, MelSpectrogram) else np.asarray(m, dtype=float)


def sentence_snr(ref, synth) -> float:
    """10 log10(sum Y^2 / sum (Y - Yhat)^2) over all entries, in dB."""
    y = _values(ref)
    yhat = _values(synth)
    check_same_shape(y, yhat, "spectrograms")
    num = float(np.sum(y**2))
    den = float(np.sum((y - yhat) ** 2))
    if den == 0.0:
        return SNR_CAP_DB
    if num == 0.0:
        return -SNR_CAP_DB
    return float(np.clip(10.0 * np.log10(num / den), -SNR_CAP_DB, SNR_CAP_DB))


def local_snr(ref, synth) -> np.ndarray:
    """20 log10(|Y| / |Y - Yhat|) per entry, capped at +/-120 dB."""
    y = _values(ref)
    yhat = _values(synth)
    check_same_shape(y, yhat, "spectrograms")
    num = np.abs(y)
    den = np.abs(y - yhat)
    out = np.full(y.shape, SNR_CAP_DB)
    ok = (num > 0) & (den > 0)
    out[ok] = np.clip(20.0 * np.log10(num[ok] / den[ok]), -SNR_CAP_DB, SNR_CAP_DB)
    out[(num == 0) & (den > 0)] = -SNR_CAP_DB
    return out


@dataclass
class BinSnrStats:
    """Per-mel-bin boxplot statistics of local SNR (truncated to [-20, 60])."""

    median: np.ndarray       # (80,)
    p25: np.ndarray
    p75: np.ndarray
    whisker_lo: np.ndarray   # furthest point within 1.5 IQR below p25
    whisker_hi: np.ndarray
    outliers: list           # per bin, values outside the whiskers

    def to_csv(self) -> str:
        lines = ["bin,median,p25,p75,lo_whisker,hi_whisker,outlier_count"]
        for j in range(self.median.size):
            lines.append(
                f"{j},{self.median[j]:.9g},{self.p25[j]:.9g},{self.p75[j]:.9g},"
                f"{self.whisker_lo[j]:.9g},{self.whisker_hi[j]:.9g},{len(self.outliers[j])}"
            )
        return "\n".join(lines) + "\n"


def bin_snr_stats(local: np.ndarray) -> BinSnrStats:
    """Boxplot statistics per mel bin with the 1.5 IQR whisker rule."""
    vals = np.asarray(local, dtype=float)
    if vals.ndim != 2 or vals.shape[0] < 1:
        raise ValueError(f"expected (N, {N_MELS}) local SNR matrix, got {vals.shape}")
    vals = np.clip(vals, TRUNCATE_LO, TRUNCATE_HI)
    p25, med, p75 = np.percentile(vals, [25.0, 50.0, 75.0], axis=0, method="linear")
    iqr = p75 - p25
    lo_fence = p25 - 1.5 * iqr
    hi_fence = p75 + 1.5 * iqr
    n_bins = vals.shape[1]
    whisker_lo = np.empty(n_bins)
    whisker_hi = np.empty(n_bins)
    outliers = []
    for j in range(n_bins):
        col = vals[:, j]
        inside = col[(col >= lo_fence[j]) & (col <= hi_fence[j])]
        whisker_lo[j] = inside.min() if inside.size else p25[j]
        whisker_hi[j] = inside.max() if inside.size else p75[j]
        outliers.append(col[(col < whisker_lo[j]) | (col > whisker_hi[j])].tolist())
    return BinSnrStats(
        median=med, p25=p25, p75=p75,
        whisker_lo=whisker_lo, whisker_hi=whisker_hi, outliers=outliers,
    )


def corpus_snr(pairs) -> tuple[float, float]:
    """Mean and population std of per-utterance sentence SNR."""
    pairs = list(pairs)
    if not pairs:
        raise ValueError("corpus_snr needs at least one (ref, synth) pair")
    snrs = np.array([sentence_snr(y, yhat) for y, yhat in pairs])
    return float(snrs.mean()), float(snrs.std())
