"""Parameter types for the tube synthesizer.

Two rates of control:

* :class:`UtteranceParams` -- 26 per-utterance scalars, of which 13 are
  trainable (source shape, tract length, nasal geometry, mix levels) and 13
  are fixed configuration (rates, radiation/loss constants).  Training code
  must never touch the fixed half.
* :class:`ControlTrack` -- a sequence of 16-dimensional
  :class:`ControlFrame` rows sampled at some frame rate; the synthesizer
  consumes tracks at its own control rate (callers interpolate first).

The module also owns the normalized <-> physical mapping used by the
inference network: every trainable dimension has a (lo, hi) range and the
network works in (-1, 1).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, fields, replace

import numpy as np

from ..validation import check_finite

__all__ = [
    "UtteranceParams",
    "ControlFrame",
    "ControlTrack",
    "Waveform",
    "TRAINABLE_UTTERANCE_FIELDS",
    "FIXED_UTTERANCE_FIELDS",
    "CONTROL_FIELDS",
    "UTTERANCE_RANGES",
    "CONTROL_RANGES",
    "REFERENCE_PITCH_HZ",
    "CLIP_GUARD",
    "utterance_to_normalized",
    "utterance_from_normalized",
    "control_to_normalized",
    "control_from_normalized",
    "speed_of_sound_cm_s",
]

# Reference for the control-rate pitch dimension (semitone offset 0 maps here).
REFERENCE_PITCH_HZ = 110.0

# Hard clip guard on synthesized waveforms; exceeding it means the waveguide
# went unstable for the given parameters.
CLIP_GUARD = 4.0


@dataclass(frozen=True)
class UtteranceParams:
    """26 utterance-rate scalars: 13 trainable + 13 fixed."""

    # trainable ----------------------------------------------------------
    master_volume_db: float = 48.0      # output gain, 60 dB = unity
    glottal_pulse_tp: float = 0.2       # rise time, fraction of period
    glottal_pulse_tn_min: float = 0.1   # fall time at full amplitude
    glottal_pulse_tn_max: float = 0.3   # fall time at zero amplitude
    breathiness_pct: float = 2.0        # noise mixed into the glottal pulse
    tract_length_cm: float = 17.5
    nasal_radius_1_cm: float = 0.6
    nasal_radius_2_cm: float = 1.0
    nasal_radius_3_cm: float = 1.2
    nasal_radius_4_cm: float = 1.0
    nasal_radius_5_cm: float = 0.6
    throat_volume_db: float = -24.0     # throat-bypass mix level
    crossmix_offset_db: float = 54.0    # voicing level where noise AM fades in

    # fixed --------------------------------------------------------------
    sample_rate_hz: float = 16000.0     # output rate
    control_rate_hz: float = 250.0      # rate the synthesizer steps controls at
    channels: int = 1
    balance: float = 0.5
    glottal_waveform: int = 0           # 0 = rise/fall pulse, 1 = sine (debug)
    temperature_c: float = 31.0         # sets speed of sound (350 m/s at 31 C)
    junction_loss_pct: float = 1.0      # per-section energy loss
    mouth_aperture_cm: float = 1.2      # sets lip reflection cutoff
    mouth_radiation_coeff: float = 0.9
    nose_radiation_coeff: float = 0.9
    throat_lowpass_hz: float = 1500.0
    amplitude_modulation: int = 1       # modulate fricative noise by voicing
    crossmix_ref_db: float = 54.0       # reference level for the AM cross-mix

    def validate(self) -> "UtteranceParams":
        """Check every type invariant; returns self for chaining."""
        for f in fields(self):
            v = getattr(self, f.name)
            if not math.isfinite(float(v)):
                raise ValueError(f"utterance field {f.name} must be finite, got {v!r}")
        if not (10.0 <= self.tract_length_cm <= 25.0):
            raise ValueError(
                f"tract_length_cm must lie in [10, 25], got {self.tract_length_cm}"
            )
        for name in NASAL_RADIUS_FIELDS:
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.mouth_aperture_cm < 0:
            raise ValueError("mouth_aperture_cm must be >= 0")
        tp, tn_min = self.glottal_pulse_tp, self.glottal_pulse_tn_min
        if not (0.0 < tp and tn_min > 0 and tp + tn_min <= 1.0):
            raise ValueError(
                f"glottal pulse timing must satisfy 0 < tp < tp + tnMin <= 1, "
                f"got tp={tp}, tnMin={tn_min}"
            )
        if self.sample_rate_hz <= 0 or self.control_rate_hz <= 0:
            raise ValueError("sample_rate_hz and control_rate_hz must be > 0")
        if self.junction_loss_pct < 0 or self.junction_loss_pct >= 100:
            raise ValueError("junction_loss_pct must lie in [0, 100)")
        return self

    def fixed_values(self) -> tuple:
        return tuple(getattr(self, n) for n in FIXED_UTTERANCE_FIELDS)

    def trainable_vector(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in TRAINABLE_UTTERANCE_FIELDS])

    def with_trainable(self, vec: np.ndarray) -> "UtteranceParams":
        vals = {n: float(v) for n, v in zip(TRAINABLE_UTTERANCE_FIELDS, vec)}
        return replace(self, **vals)

    def to_text(self) -> str:
        lines = [f"{f.name} = {getattr(self, f.name)!r}" for f in fields(self)]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "UtteranceParams":
        known = {f.name: f.type for f in fields(cls)}
        values = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"line {lineno}: expected 'name = value', got {raw!r}")
            name, _, val = line.partition("=")
            name = name.strip()
            if name not in known:
                raise ValueError(f"line {lineno}: unknown utterance field {name!r}")
            try:
                values[name] = float(val)
            except ValueError as exc:
                raise ValueError(f"line {lineno}: bad value for {name}: {exc}") from exc
        missing = set(known) - set(values)
        if missing:
            raise ValueError(f"missing utterance fields: {sorted(missing)}")
        for name in ("channels", "glottal_waveform", "amplitude_modulation"):
            values[name] = int(values[name])
        return cls(**values).validate()


TRAINABLE_UTTERANCE_FIELDS = (
    "master_volume_db",
    "glottal_pulse_tp",
    "glottal_pulse_tn_min",
    "glottal_pulse_tn_max",
    "breathiness_pct",
    "tract_length_cm",
    "nasal_radius_1_cm",
    "nasal_radius_2_cm",
    "nasal_radius_3_cm",
    "nasal_radius_4_cm",
    "nasal_radius_5_cm",
    "throat_volume_db",
    "crossmix_offset_db",
)

FIXED_UTTERANCE_FIELDS = (
    "sample_rate_hz",
    "control_rate_hz",
    "channels",
    "balance",
    "glottal_waveform",
    "temperature_c",
    "junction_loss_pct",
    "mouth_aperture_cm",
    "mouth_radiation_coeff",
    "nose_radiation_coeff",
    "throat_lowpass_hz",
    "amplitude_modulation",
    "crossmix_ref_db",
)

NASAL_RADIUS_FIELDS = tuple(f"nasal_radius_{i}_cm" for i in range(1, 6))

assert len(TRAINABLE_UTTERANCE_FIELDS) == 13 and len(FIXED_UTTERANCE_FIELDS) == 13

# Physical ranges for the 13 trainable utterance dims.  The network output
# in (-1, 1) maps linearly onto these; every point of the box must be a
# valid UtteranceParams (tp + tnMin <= 0.7 < 1 by construction).
UTTERANCE_RANGES: dict[str, tuple[float, float]] = {
    "master_volume_db": (0.0, 60.0),
    "glottal_pulse_tp": (0.05, 0.40),
    "glottal_pulse_tn_min": (0.05, 0.30),
    "glottal_pulse_tn_max": (0.10, 0.55),
    "breathiness_pct": (0.0, 100.0),
    "tract_length_cm": (10.0, 25.0),
    "nasal_radius_1_cm": (0.2, 1.8),
    "nasal_radius_2_cm": (0.2, 1.8),
    "nasal_radius_3_cm": (0.2, 1.8),
    "nasal_radius_4_cm": (0.2, 1.8),
    "nasal_radius_5_cm": (0.2, 1.8),
    "throat_volume_db": (-60.0, 0.0),
    "crossmix_offset_db": (30.0, 60.0),
}


@dataclass(frozen=True)
class ControlFrame:
    """One 16-dimensional control-rate frame."""

    pitch_semitones: float = 0.0        # offset from REFERENCE_PITCH_HZ
    glottal_volume_db: float = -12.0
    aspiration_volume_db: float = -60.0
    fricative_volume_db: float = -60.0
    fricative_position: float = 0.7     # 0 = glottis end, 1 = lips
    fricative_cf_hz: float = 2500.0
    fricative_bw_hz: float = 800.0
    r1_cm: float = 1.0
    r2_cm: float = 1.0
    r3_cm: float = 1.0
    r4_cm: float = 1.0
    r5_cm: float = 1.0
    r6_cm: float = 1.0
    r7_cm: float = 1.0
    r8_cm: float = 1.0
    velum_cm: float = 0.0

    def validate(self) -> "ControlFrame":
        vec = self.to_vector()
        radii = vec[7:16]
        if np.any(radii < 0):
            raise ValueError("control radii must be >= 0")
        if not (0.0 <= self.fricative_position <= 1.0):
            raise ValueError("fricative_position must lie in [0, 1]")
        if not (100.0 <= self.fricative_cf_hz <= 8000.0):
            raise ValueError("fricative_cf_hz must lie in [100, 8000]")
        # dB fields may be -inf (hard silence); everything else must be finite
        for i, name in enumerate(CONTROL_FIELDS):
            v = vec[i]
            if name in DB_CONTROL_FIELDS:
                if math.isnan(v) or v == math.inf:
                    raise ValueError(f"{name} may be finite or -inf, got {v!r}")
            elif not math.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v!r}")
        return self

    def to_vector(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in CONTROL_FIELDS])

    @classmethod
    def from_vector(cls, vec) -> "ControlFrame":
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (16,):
            raise ValueError(f"control frame needs 16 values, got shape {vec.shape}")
        return cls(**{n: float(v) for n, v in zip(CONTROL_FIELDS, vec)})


CONTROL_FIELDS = (
    "pitch_semitones",
    "glottal_volume_db",
    "aspiration_volume_db",
    "fricative_volume_db",
    "fricative_position",
    "fricative_cf_hz",
    "fricative_bw_hz",
    "r1_cm",
    "r2_cm",
    "r3_cm",
    "r4_cm",
    "r5_cm",
    "r6_cm",
    "r7_cm",
    "r8_cm",
    "velum_cm",
)

DB_CONTROL_FIELDS = frozenset(
    ("glottal_volume_db", "aspiration_volume_db", "fricative_volume_db")
)

CONTROL_RANGES: dict[str, tuple[float, float]] = {
    "pitch_semitones": (-12.0, 12.0),
    "glottal_volume_db": (-60.0, 0.0),
    "aspiration_volume_db": (-60.0, 0.0),
    "fricative_volume_db": (-60.0, 0.0),
    "fricative_position": (0.0, 1.0),
    "fricative_cf_hz": (100.0, 8000.0),
    "fricative_bw_hz": (100.0, 2000.0),
    "r1_cm": (0.1, 2.4),
    "r2_cm": (0.1, 2.4),
    "r3_cm": (0.1, 2.4),
    "r4_cm": (0.1, 2.4),
    "r5_cm": (0.1, 2.4),
    "r6_cm": (0.1, 2.4),
    "r7_cm": (0.1, 2.4),
    "r8_cm": (0.1, 2.4),
    "velum_cm": (0.0, 1.2),
}


@dataclass
class ControlTrack:
    """Ordered control frames at a fixed frame rate."""

    frame_rate_hz: float
    frames: np.ndarray  # (n_frames, 16)

    def __post_init__(self):
        self.frames = np.atleast_2d(np.asarray(self.frames, dtype=float))
        if self.frame_rate_hz <= 0:
            raise ValueError("frame_rate_hz must be > 0")
        if self.frames.size == 0:
            raise ValueError("control track must contain at least one frame")
        if self.frames.shape[1] != 16:
            raise ValueError(f"control frames need 16 columns, got {self.frames.shape[1]}")

    def validate(self) -> "ControlTrack":
        for row in self.frames:
            ControlFrame.from_vector(row).validate()
        return self

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def duration_s(self) -> float:
        return (self.n_frames - 1) / self.frame_rate_hz

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(CONTROL_FIELDS)
        for row in self.frames:
            w.writerow([f"{v:.9g}" for v in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, frame_rate_hz: float) -> "ControlTrack":
        rows = list(csv.reader(io.StringIO(text)))
        rows = [r for r in rows if r]
        if not rows:
            raise ValueError("control CSV is empty")
        header = tuple(h.strip() for h in rows[0])
        if header != CONTROL_FIELDS:
            raise ValueError(
                f"control CSV header mismatch: expected {','.join(CONTROL_FIELDS)}"
            )
        if len(rows) < 2:
            raise ValueError("control CSV has a header but no frames")
        frames = []
        for lineno, row in enumerate(rows[1:], start=2):
            if len(row) != 16:
                raise ValueError(f"line {lineno}: expected 16 columns, got {len(row)}")
            try:
                frames.append([float(v) for v in row])
            except ValueError as exc:
                raise ValueError(f"line {lineno}: {exc}") from exc
        return cls(frame_rate_hz=frame_rate_hz, frames=np.array(frames))


@dataclass
class Waveform:
    """Mono audio at a known sample rate, normalized amplitude."""

    sample_rate_hz: float
    samples: np.ndarray

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64).reshape(-1)
        if self.sample_rate_hz <= 0:
            raise ValueError("sample_rate_hz must be > 0")

    def validate(self) -> "Waveform":
        check_finite(self.samples, "waveform samples")
        peak = np.max(np.abs(self.samples)) if self.samples.size else 0.0
        if peak > CLIP_GUARD:
            raise ValueError(f"waveform exceeds clip guard {CLIP_GUARD}: peak {peak:.3f}")
        return self

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz


def speed_of_sound_cm_s(temperature_c: float) -> float:
    """Speed of sound in cm/s from ambient temperature (linear approximation)."""
    return (331.4 + 0.6 * temperature_c) * 100.0


# --- normalized <-> physical mappings -----------------------------------

_UTT_LO = np.array([UTTERANCE_RANGES[n][0] for n in TRAINABLE_UTTERANCE_FIELDS])
_UTT_HI = np.array([UTTERANCE_RANGES[n][1] for n in TRAINABLE_UTTERANCE_FIELDS])
_CTL_LO = np.array([CONTROL_RANGES[n][0] for n in CONTROL_FIELDS])
_CTL_HI = np.array([CONTROL_RANGES[n][1] for n in CONTROL_FIELDS])


def _to_norm(phys: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    return np.clip(2.0 * (phys - lo) / (hi - lo) - 1.0, -1.0, 1.0)


def _from_norm(norm: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    return lo + (np.clip(norm, -1.0, 1.0) + 1.0) * 0.5 * (hi - lo)


def utterance_to_normalized(u: UtteranceParams) -> np.ndarray:
    """13 trainable fields -> (-1, 1) vector."""
    return _to_norm(u.trainable_vector(), _UTT_LO, _UTT_HI)


def utterance_from_normalized(
    norm: np.ndarray, template: UtteranceParams | None = None
) -> UtteranceParams:
    """(-1, 1) vector -> UtteranceParams, fixed fields taken from `template`."""
    base = template if template is not None else UtteranceParams()
    return base.with_trainable(_from_norm(np.asarray(norm, dtype=float), _UTT_LO, _UTT_HI))


def control_to_normalized(frames: np.ndarray) -> np.ndarray:
    """(n, 16) physical control rows -> (-1, 1)."""
    return _to_norm(np.asarray(frames, dtype=float), _CTL_LO, _CTL_HI)


def control_from_normalized(norm: np.ndarray) -> np.ndarray:
    """(n, 16) normalized rows -> physical control rows."""
    return _from_norm(np.asarray(norm, dtype=float), _CTL_LO, _CTL_HI)
