"""Corpora: WAV ingestion, splits, and the two synthetic benchmarks.

The self-inversion corpus synthesizes clips from known articulatory
parameters so inversion quality has an absolute reference; the toy linear
problem gives the training loop a closed-form oracle to be checked against.
"""

from __future__ import annotations

import wave
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import butter, lfilter

from .features import AUDIO_RATE_HZ, FRAME_RATE_HZ, MelSpectrogram, log_mel, resample
from .trm import (
    CONTROL_FIELDS,
    ControlTrack,
    SynthesisError,
    UtteranceParams,
    Waveform,
    control_from_normalized,
    interpolate_control,
    synthesize,
    utterance_from_normalized,
)

__all__ = [
    "Clip",
    "Corpus",
    "ToyLinearProblem",
    "load_wav_corpus",
    "split",
    "make_self_inversion_corpus",
    "make_toy_linear_problem",
    "read_wav",
    "write_wav",
    "smooth_noise",
]


# --- WAV I/O (PCM 16-bit mono RIFF) --------------------------------------

def write_wav(path, w: Waveform) -> None:
    samples = np.clip(w.samples, -1.0, 1.0)
    pcm = np.round(samples * 32767.0).astype("<i2")
    with wave.open(str(path), "wb") as f:
        f.setnchannels(1)
        f.setsampwidth(2)
        f.setframerate(int(round(w.sample_rate_hz)))
        f.writeframes(pcm.tobytes())


def read_wav(path) -> Waveform:
    with wave.open(str(path), "rb") as f:
        n_channels = f.getnchannels()
        width = f.getsampwidth()
        rate = f.getframerate()
        frames = f.readframes(f.getnframes())
    if width != 2:
        raise ValueError(f"{path}: only 16-bit PCM supported, got {8 * width}-bit")
    data = np.frombuffer(frames, dtype="<i2").astype(np.float64) / 32768.0
    if n_channels > 1:
        data = data.reshape(-1, n_channels).mean(axis=1)
    return Waveform(sample_rate_hz=float(rate), samples=data)


# --- corpus types ---------------------------------------------------------

@dataclass
class Clip:
    clip_id: str
    waveform: Waveform | None
    mel: object  # MelSpectrogram, or a raw (n, d) observation matrix
    split: str = ""
    # ground truth, present only for synthetic corpora: normalized latent
    # (utterance (13,), control (n_frames, 16)) plus the synthesis seed
    truth: tuple | None = None
    synthesis_seed: int | None = None

    @property
    def observation(self) -> np.ndarray:
        return self.mel.values if hasattr(self.mel, "values") else np.asarray(self.mel)

    @property
    def n_frames(self) -> int:
        return self.observation.shape[0]


@dataclass
class Corpus:
    clips: list[Clip]
    utterance_template: UtteranceParams = field(default_factory=UtteranceParams)

    def __post_init__(self):
        ids = [c.clip_id for c in self.clips]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise ValueError(f"duplicate clip ids: {dupes}")

    def __len__(self) -> int:
        return len(self.clips)

    def subset(self, split_name: str) -> list[Clip]:
        return [c for c in self.clips if c.split == split_name]

    def manifest_csv(self) -> str:
        lines = ["id,split,frames,duration_s"]
        for c in self.clips:
            dur = c.waveform.duration_s if c.waveform is not None else (
                c.n_frames / FRAME_RATE_HZ
            )
            lines.append(f"{c.clip_id},{c.split},{c.n_frames},{dur:.6f}")
        return "\n".join(lines) + "\n"


def load_wav_corpus(directory) -> Corpus:
    """Load every .wav under a directory tree, resampled to 16 kHz and
    peak-normalized to 0.95.  Clip id = filename stem (must be unique)."""
    directory = Path(directory)
    paths = sorted(directory.rglob("*.wav"))
    clips = []
    errors = []
    for p in paths:
        try:
            w = read_wav(p)
            if abs(w.sample_rate_hz - AUDIO_RATE_HZ) > 1e-9:
                w = resample(w, AUDIO_RATE_HZ)
            peak = np.max(np.abs(w.samples)) if w.samples.size else 0.0
            if peak > 0:
                w = Waveform(AUDIO_RATE_HZ, w.samples * (0.95 / peak))
            clips.append(Clip(clip_id=p.stem, waveform=w, mel=log_mel(w)))
        except (ValueError, wave.Error, OSError) as exc:
            errors.append(f"{p}: {exc}")
    if errors:
        raise ValueError("unreadable audio files:\n" + "\n".join(errors))
    if not clips:
        raise ValueError(f"no .wav files under {directory}")
    return Corpus(clips=clips)


def split(corpus: Corpus, ratios, seed: int) -> Corpus:
    """Seeded shuffle + contiguous partition, largest-remainder rounding.

    `ratios` maps split name -> fraction; fractions must sum to 1.
    """
    names = list(ratios)
    fracs = np.array([ratios[n] for n in names], dtype=float)
    if abs(fracs.sum() - 1.0) > 1e-9:
        raise ValueError(f"split ratios must sum to 1, got {fracs.sum()}")
    n = len(corpus.clips)
    nonzero = int(np.count_nonzero(fracs))
    if n < nonzero:
        raise ValueError(f"{n} clips cannot fill {nonzero} splits")
    exact = fracs * n
    counts = np.floor(exact).astype(int)
    remainder = exact - counts
    for i in np.argsort(-remainder)[: n - counts.sum()]:
        counts[i] += 1
    order = np.random.default_rng(seed).permutation(n)
    pos = 0
    for name, count in zip(names, counts):
        for idx in order[pos : pos + count]:
            corpus.clips[idx].split = name
        pos += count
    return corpus


# --- synthetic self-inversion corpus --------------------------------------

def smooth_noise(rng, n, frame_rate, cutoff_hz=8.0, order=4):
    """Unit-ish smooth noise: 4th-order lowpassed white noise, peak <= 1."""
    if n == 1:
        return np.zeros(1)
    b, a = butter(order, min(cutoff_hz, 0.45 * frame_rate), fs=frame_rate)
    x = lfilter(b, a, rng.standard_normal(n + 8 * order))[8 * order :]
    peak = np.max(np.abs(x))
    return x / peak if peak > 0 else x

# normalized-space centre and half-range for each control dim when drawing
# random articulator trajectories: volumes stay clearly voiced, radii stay
# away from full closure, fricatives stay mild
_TRACK_CENTER = {
    "pitch_semitones": 0.0,
    "glottal_volume_db": 0.65,
    "aspiration_volume_db": -0.7,
    "fricative_volume_db": -0.6,
    "fricative_position": 0.4,
    "fricative_cf_hz": -0.3,
    "fricative_bw_hz": -0.3,
    "velum_cm": -0.5,
}
_TRACK_SPAN = {
    "pitch_semitones": 0.35,
    "glottal_volume_db": 0.25,
    "aspiration_volume_db": 0.25,
    "fricative_volume_db": 0.35,
    "fricative_position": 0.5,
    "fricative_cf_hz": 0.5,
    "fricative_bw_hz": 0.5,
    "velum_cm": 0.45,
}
_RADII_CENTER, _RADII_SPAN = 0.15, 0.55


def random_normalized_track(rng, n_frames: int) -> np.ndarray:
    """(n_frames, 16) smooth normalized control trajectory."""
    out = np.empty((n_frames, 16))
    for d, name in enumerate(CONTROL_FIELDS):
        x = smooth_noise(rng, n_frames, FRAME_RATE_HZ)
        if name.startswith("r") and name.endswith("_cm"):
            centre, span = _RADII_CENTER, _RADII_SPAN
        else:
            centre, span = _TRACK_CENTER[name], _TRACK_SPAN[name]
        out[:, d] = np.clip(centre + span * x, -0.98, 0.98)
    return out


DEFAULT_UTTERANCE_CENTER = {
    "master_volume_db": 0.15,
    "glottal_pulse_tp": -0.2,
    "glottal_pulse_tn_min": -0.3,
    "glottal_pulse_tn_max": -0.2,
    "breathiness_pct": -0.9,
    "tract_length_cm": -0.2,     # ~16 cm
    "nasal_radius_1_cm": -0.4,
    "nasal_radius_2_cm": -0.2,
    "nasal_radius_3_cm": 0.0,
    "nasal_radius_4_cm": -0.2,
    "nasal_radius_5_cm": -0.4,
    "throat_volume_db": -0.2,
    "crossmix_offset_db": 0.0,
}


def random_normalized_utterance(rng, centre: dict | None = None, jitter: float = 0.15):
    from .trm.params import TRAINABLE_UTTERANCE_FIELDS

    base = dict(DEFAULT_UTTERANCE_CENTER)
    if centre:
        base.update(centre)
    vec = np.array([base[n] for n in TRAINABLE_UTTERANCE_FIELDS])
    return np.clip(vec + jitter * rng.uniform(-1, 1, size=13), -0.98, 0.98)


def synthesize_from_normalized(
    utt_norm: np.ndarray,
    ctrl_norm: np.ndarray,
    template: UtteranceParams,
    seed: int,
) -> Waveform:
    """Rescale a normalized latent to physical units and run the synth.

    `ctrl_norm` rows are at the mel frame rate; audio covers one hop per row.
    """
    u = utterance_from_normalized(utt_norm, template)
    frames = control_from_normalized(ctrl_norm)
    track = ControlTrack(frame_rate_hz=FRAME_RATE_HZ, frames=frames)
    fine = interpolate_control(track, u.control_rate_hz)
    duration = ctrl_norm.shape[0] / FRAME_RATE_HZ
    return synthesize(u, fine, seed=seed, duration_s=duration)


def make_self_inversion_corpus(
    n: int,
    duration_range=(0.5, 1.0),
    u_center: dict | None = None,
    seed: int = 0,
    max_retries: int = 5,
) -> Corpus:
    """Synthetic clips with stored ground-truth latents."""
    if n < 1:
        raise ValueError("need n >= 1 clips")
    template = UtteranceParams()
    clips = []
    for i in range(n):
        for attempt in range(max_retries):
            ss = np.random.SeedSequence([seed, 0x5E1F, i, attempt])
            rng = np.random.default_rng(ss)
            synth_seed = int(ss.generate_state(1)[0])
            dur = rng.uniform(*duration_range)
            n_frames = max(4, int(round(dur * FRAME_RATE_HZ)))
            utt = random_normalized_utterance(rng, u_center)
            ctrl = random_normalized_track(rng, n_frames)
            try:
                w = synthesize_from_normalized(utt, ctrl, template, synth_seed)
            except SynthesisError:
                continue
            clips.append(
                Clip(
                    clip_id=f"clip{i:04d}",
                    waveform=w,
                    mel=log_mel(w),
                    truth=(utt, ctrl),
                    synthesis_seed=synth_seed,
                )
            )
            break
        else:
            raise SynthesisError(f"clip {i}: synthesis unstable after {max_retries} tries")
    return Corpus(clips=clips, utterance_template=template)


# --- toy linear inverse problem --------------------------------------------

@dataclass
class ToyLinearProblem:
    """x = A z + e with well-conditioned A and known latents."""

    matrix: np.ndarray          # (d_x, d_z)
    noise_std: float
    latents: np.ndarray         # (n, d_z) ground truth
    observations: np.ndarray    # (n, d_x)

    @property
    def d_z(self) -> int:
        return self.matrix.shape[1]

    @property
    def d_x(self) -> int:
        return self.matrix.shape[0]

    def forward(self, z: np.ndarray, seed: int) -> np.ndarray:
        """The engine-facing forward operator: (1, d_x) observation row."""
        z = np.asarray(z, dtype=float).reshape(-1)
        noise = np.random.default_rng(seed).standard_normal(self.d_x)
        return (self.matrix @ z + self.noise_std * noise)[None, :]

    def corpus(self) -> Corpus:
        clips = [
            Clip(
                clip_id=f"toy{i:04d}",
                waveform=None,
                mel=x[None, :],  # single-frame observation row
                truth=(z, None),
            )
            for i, (z, x) in enumerate(zip(self.latents, self.observations))
        ]
        return Corpus(clips=clips)

    def least_squares_reconstruction_mse(self, observations=None) -> float:
        """Oracle: mean squared reconstruction residual of the pseudo-inverse
        solution, per observation entry."""
        x = self.observations if observations is None else observations
        z_hat, *_ = np.linalg.lstsq(self.matrix, x.T, rcond=None)
        resid = x.T - self.matrix @ z_hat
        return float(np.mean(resid**2))


def make_toy_linear_problem(
    d_z: int, d_x: int, n: int, noise_std: float, seed: int = 0
) -> ToyLinearProblem:
    if d_x < d_z:
        raise ValueError("need d_x >= d_z")
    if n < d_z:
        raise ValueError("need n >= d_z samples")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x70F]))
    while True:
        a = rng.normal(size=(d_x, d_z))
        if np.linalg.cond(a) < 100.0:
            break
    latents = rng.uniform(-1.0, 1.0, size=(n, d_z))
    noise = rng.standard_normal((n, d_x))
    observations = latents @ a.T + noise_std * noise
    return ToyLinearProblem(
        matrix=a, noise_std=noise_std, latents=latents, observations=observations
    )
