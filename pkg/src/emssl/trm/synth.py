"""Forward synthesis: articulatory parameters -> waveform.

Control tracks are interpolated to the synthesizer's 250 Hz control rate,
ramped linearly per audio sample, and driven through the waveguide at the
tract-length-derived internal rate.  The result is band-limited resampled to
the configured output rate.  The whole path is a pure function of
(parameters, noise seed).
"""

from __future__ import annotations

import numpy as np

from ..validation import check_finite
from .glottal import pulse_shape, pulse_train
from .params import (
    CLIP_GUARD,
    REFERENCE_PITCH_HZ,
    ControlTrack,
    UtteranceParams,
    Waveform,
)
from .tube import (
    N_ORAL_SECTIONS,
    run_waveguide,
    time_varying_biquad,
    validate_and_build_tube,
)

__all__ = ["interpolate_control", "synthesize", "SynthesisError"]


class SynthesisError(RuntimeError):
    """Raised when the waveguide output exceeds the clip guard."""


def interpolate_control(track: ControlTrack, target_rate_hz: float) -> ControlTrack:
    """Per-dimension linear interpolation onto a finer frame grid.

    First and last frames are preserved exactly; the output has
    round(duration * target_rate) + 1 frames, where duration spans the frame
    centers.  A single-frame track extends as a constant.
    """
    if target_rate_hz < track.frame_rate_hz:
        raise ValueError(
            f"target rate {target_rate_hz} Hz below track rate {track.frame_rate_hz} Hz"
        )
    frames = track.frames
    if frames.shape[0] == 1:
        return ControlTrack(frame_rate_hz=target_rate_hz, frames=frames.copy())
    duration = (frames.shape[0] - 1) / track.frame_rate_hz
    n_out = int(round(duration * target_rate_hz)) + 1
    t_src = np.arange(frames.shape[0]) / track.frame_rate_hz
    t_dst = np.linspace(0.0, duration, n_out)
    out = np.empty((n_out, frames.shape[1]))
    for d in range(frames.shape[1]):
        out[:, d] = np.interp(t_dst, t_src, frames[:, d])
    out[0] = frames[0]
    out[-1] = frames[-1]
    return ControlTrack(frame_rate_hz=target_rate_hz, frames=out)


def _db_to_gain(db):
    """dB relative to full scale; -inf maps to exactly 0."""
    return np.power(10.0, np.asarray(db, dtype=float) / 20.0)


def _ramp(values: np.ndarray, frame_rate: float, n_samples: int, sr: float) -> np.ndarray:
    """Linear per-sample ramp of control-rate values, held beyond the ends."""
    t_frames = np.arange(values.shape[0]) / frame_rate
    t_samples = np.arange(n_samples) / sr
    return np.interp(t_samples, t_frames, values)


def synthesize(
    u: UtteranceParams,
    track: ControlTrack,
    *,
    seed: int = 0,
    duration_s: float | None = None,
) -> Waveform:
    """Run the waveguide over a control track.

    The track must already be at the engine control rate (interpolate first).
    Output duration defaults to n_frames / control_rate, i.e. one control
    period per frame.  Deterministic for a fixed seed; raises
    SynthesisError if any output sample exceeds the clip guard.
    """
    if abs(track.frame_rate_hz - u.control_rate_hz) > 1e-9:
        raise ValueError(
            f"track rate {track.frame_rate_hz} Hz != engine control rate "
            f"{u.control_rate_hz} Hz; interpolate_control first"
        )
    tube = validate_and_build_tube(u, track.frames[0, 7:15])
    sr_int = tube.internal_rate_hz
    if duration_s is None:
        duration_s = track.n_frames / track.frame_rate_hz
    n_int = max(1, int(round(duration_s * sr_int)))
    n_out = max(1, int(round(duration_s * u.sample_rate_hz)))
    rng = np.random.default_rng(seed)
    fr = track.frames
    rate = track.frame_rate_hz

    # per-sample control values at the internal rate; dB dims become linear
    # gains before ramping so -inf endpoints stay exact zeros
    pitch_hz = REFERENCE_PITCH_HZ * 2.0 ** (
        _ramp(fr[:, 0], rate, n_int, sr_int) / 12.0
    )
    glottal_gain = _ramp(_db_to_gain(fr[:, 1]), rate, n_int, sr_int)
    asp_gain = _ramp(_db_to_gain(fr[:, 2]), rate, n_int, sr_int)
    fric_gain = _ramp(_db_to_gain(fr[:, 3]), rate, n_int, sr_int)
    fric_pos = _ramp(fr[:, 4], rate, n_int, sr_int)
    fric_cf = np.minimum(_ramp(fr[:, 5], rate, n_int, sr_int), 0.45 * sr_int)
    fric_bw = np.minimum(_ramp(fr[:, 6], rate, n_int, sr_int), 0.3 * sr_int)
    oral_radii = np.empty((n_int, N_ORAL_SECTIONS))
    for i in range(N_ORAL_SECTIONS):
        oral_radii[:, i] = _ramp(fr[:, 7 + i], rate, n_int, sr_int)
    velum_r = _ramp(fr[:, 15], rate, n_int, sr_int)

    # glottal source: amplitude-dependent fall time, per-period zero mean
    phase = np.cumsum(pitch_hz) / sr_int
    tn = u.glottal_pulse_tn_min + (u.glottal_pulse_tn_max - u.glottal_pulse_tn_min) * (
        1.0 - np.clip(glottal_gain, 0.0, 1.0)
    )
    pulse = pulse_train(phase, u.glottal_pulse_tp, tn, sine=(u.glottal_waveform == 1))
    breath = u.breathiness_pct / 100.0
    if breath > 0.0:
        noise = rng.standard_normal(n_int)
        rms = float(np.sqrt(np.mean(pulse**2)))
        pulse = (1.0 - breath) * pulse + breath * noise * (rms if rms > 0 else 0.3)
    asp_noise = rng.standard_normal(n_int)
    source = 0.5 * (glottal_gain * pulse + asp_gain * asp_noise)

    # fricative: white noise through a 2nd-order bandpass at (cf, bw),
    # optionally amplitude-modulated by the voicing pulse
    w0 = 2.0 * np.pi * fric_cf / sr_int
    q = np.maximum(fric_cf / np.maximum(fric_bw, 1.0), 0.2)
    alpha = np.sin(w0) / (2.0 * q)
    a0 = 1.0 + alpha
    fb0 = alpha / a0
    fb1 = np.zeros(n_int)
    fb2 = -alpha / a0
    fa1 = -2.0 * np.cos(w0) / a0
    fa2 = (1.0 - alpha) / a0
    fric_white = rng.standard_normal(n_int)
    fric = time_varying_biquad(fric_white, fb0, fb1, fb2, fa1, fa2)
    if u.amplitude_modulation:
        raw_pulse = pulse_shape(phase - np.floor(phase), u.glottal_pulse_tp, tn)
        mod = np.clip(
            glottal_gain * 10.0 ** ((u.crossmix_offset_db - u.crossmix_ref_db) / 20.0),
            0.0,
            1.0,
        )
        fric = fric * ((1.0 - mod) + mod * raw_pulse)
    fric *= 0.5 * fric_gain
    fric_idx = np.clip(
        np.rint(fric_pos * (N_ORAL_SECTIONS - 1)), 0, N_ORAL_SECTIONS - 1
    ).astype(np.int64)

    oral_areas = np.pi * oral_radii**2
    velum_area = np.pi * velum_r**2

    c = tube.speed_of_sound_cm_s
    mouth_fc = c / (2.0 * np.pi * max(u.mouth_aperture_cm, 0.05))
    nose_fc = c / (2.0 * np.pi * max(u.nasal_radius_5_cm, 0.05))
    mouth_alpha = 1.0 - np.exp(-2.0 * np.pi * min(mouth_fc, 0.45 * sr_int) / sr_int)
    nose_alpha = 1.0 - np.exp(-2.0 * np.pi * min(nose_fc, 0.45 * sr_int) / sr_int)
    throat_alpha = 1.0 - np.exp(
        -2.0 * np.pi * min(u.throat_lowpass_hz, 0.45 * sr_int) / sr_int
    )
    throat_gain = _db_to_gain(u.throat_volume_db)

    raw = run_waveguide(
        source,
        fric,
        fric_idx,
        oral_areas,
        velum_area,
        tube.nasal_areas_cm2,
        0.75,
        u.mouth_radiation_coeff,
        mouth_alpha,
        u.nose_radiation_coeff,
        nose_alpha,
        float(throat_gain),
        throat_alpha,
        tube.damping,
        tube.forward,
        tube.backward,
        tube.nasal_forward,
        tube.nasal_backward,
    )

    master_gain = 10.0 ** ((u.master_volume_db - 60.0) / 20.0)
    raw *= master_gain
    check_finite(raw, "synthesized samples")
    peak = float(np.max(np.abs(raw))) if raw.size else 0.0
    if peak > CLIP_GUARD:
        raise SynthesisError(
            f"waveguide output exceeded clip guard ({peak:.3f} > {CLIP_GUARD})"
        )

    # internal rate -> output rate
    from ..features import resample

    internal = Waveform(sample_rate_hz=sr_int, samples=raw)
    out = resample(internal, u.sample_rate_hz, n_out=n_out)
    peak_out = float(np.max(np.abs(out.samples))) if out.samples.size else 0.0
    if peak_out > CLIP_GUARD:
        raise SynthesisError(
            f"resampled output exceeded clip guard ({peak_out:.3f} > {CLIP_GUARD})"
        )
    return out
