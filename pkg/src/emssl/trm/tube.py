"""Scattering-junction waveguide for the vocal tract and nasal branch.

Geometry: 8 oropharyngeal sections driven by the control-rate region radii,
a three-way velum junction halfway along the tract, and a nasal branch made
of a velum coupling section plus 5 fixed-radius sections.  Each section is
one sample of travel at the internal rate, which is derived from the tract
length so that length changes shift the resonances continuously:

    internal_rate = 8 * c / tract_length

Pressure waves scatter at junctions with k = (A_i - A_{i+1}) / (A_i + A_{i+1});
per-section damping, lowpassed partial reflection at the lips/nostrils, and
first-difference radiation close the loop.  The whole update is passive, so
the model is unconditionally stable for any valid parameter set.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .params import UtteranceParams, speed_of_sound_cm_s

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


__all__ = ["TubeState", "validate_and_build_tube", "reflection_coefficient",
           "run_waveguide", "time_varying_biquad", "N_ORAL_SECTIONS",
           "N_NASAL_SECTIONS", "VELUM_JUNCTION"]

N_ORAL_SECTIONS = 8
N_NASAL_SECTIONS = 5
# three-way junction sits between oral sections 3 and 4 (0-based), i.e. at
# the midpoint of the tract
VELUM_JUNCTION = 3

_AREA_EPS = 1e-6  # cm^2 floor inside junction denominators


def reflection_coefficient(area_left: float, area_right: float) -> float:
    """k = (A_l - A_r) / (A_l + A_r), the junction reflection for a wave
    arriving from the left section."""
    denom = area_left + area_right
    if denom <= 0:
        return 0.0
    return (area_left - area_right) / denom


@dataclass
class TubeState:
    """Initialized waveguide: geometry, derived rates, zeroed delay lines."""

    oral_areas_cm2: np.ndarray      # (8,)
    nasal_areas_cm2: np.ndarray     # (5,)
    oral_reflections: np.ndarray    # (7,) from the initial oral areas
    nasal_reflections: np.ndarray   # (4,) between the 5 fixed nasal sections
    internal_rate_hz: float
    speed_of_sound_cm_s: float
    damping: float                  # per-section per-tick gain, (1 - loss)
    forward: np.ndarray             # (8,) oral rail toward the lips
    backward: np.ndarray            # (8,) oral rail toward the glottis
    nasal_forward: np.ndarray       # (6,) velum section + 5 nasal sections
    nasal_backward: np.ndarray      # (6,)


def validate_and_build_tube(
    u: UtteranceParams,
    oral_radii_cm: np.ndarray | None = None,
) -> TubeState:
    """Validate utterance parameters and set up the waveguide.

    `oral_radii_cm` seeds the 8 oral section areas (defaults to a uniform
    1 cm tube); during synthesis the control track re-drives them per sample.
    Rejects geometry whose per-section delay would round below one sample at
    the configured output rate.
    """
    u.validate()
    if oral_radii_cm is None:
        oral_radii_cm = np.ones(N_ORAL_SECTIONS)
    oral_radii_cm = np.asarray(oral_radii_cm, dtype=float)
    if oral_radii_cm.shape != (N_ORAL_SECTIONS,):
        raise ValueError(f"expected {N_ORAL_SECTIONS} oral radii")
    if not np.all(np.isfinite(oral_radii_cm)) or np.any(oral_radii_cm < 0):
        raise ValueError("oral radii must be finite and >= 0")

    c = speed_of_sound_cm_s(u.temperature_c)
    section_delay_out = (u.tract_length_cm / N_ORAL_SECTIONS) * u.sample_rate_hz / c
    if round(section_delay_out) < 1:
        raise ValueError(
            f"tract length {u.tract_length_cm} cm gives less than one sample of "
            f"delay per section at {u.sample_rate_hz:.0f} Hz"
        )
    internal_rate = N_ORAL_SECTIONS * c / u.tract_length_cm

    oral_areas = np.pi * oral_radii_cm**2
    nasal_radii = np.array(
        [
            u.nasal_radius_1_cm,
            u.nasal_radius_2_cm,
            u.nasal_radius_3_cm,
            u.nasal_radius_4_cm,
            u.nasal_radius_5_cm,
        ]
    )
    nasal_areas = np.pi * nasal_radii**2

    oral_k = np.array(
        [
            reflection_coefficient(oral_areas[i], oral_areas[i + 1])
            for i in range(N_ORAL_SECTIONS - 1)
        ]
    )
    nasal_k = np.array(
        [
            reflection_coefficient(nasal_areas[i], nasal_areas[i + 1])
            for i in range(N_NASAL_SECTIONS - 1)
        ]
    )

    return TubeState(
        oral_areas_cm2=oral_areas,
        nasal_areas_cm2=nasal_areas,
        oral_reflections=oral_k,
        nasal_reflections=nasal_k,
        internal_rate_hz=internal_rate,
        speed_of_sound_cm_s=c,
        damping=1.0 - u.junction_loss_pct / 100.0,
        forward=np.zeros(N_ORAL_SECTIONS),
        backward=np.zeros(N_ORAL_SECTIONS),
        nasal_forward=np.zeros(N_NASAL_SECTIONS + 1),
        nasal_backward=np.zeros(N_NASAL_SECTIONS + 1),
    )


@njit(cache=True)
def time_varying_biquad(x, b0, b1, b2, a1, a2):
    """Direct-form-II-transposed biquad with per-sample coefficients."""
    n = x.shape[0]
    y = np.empty(n)
    s1 = 0.0
    s2 = 0.0
    for t in range(n):
        yt = b0[t] * x[t] + s1
        s1 = b1[t] * x[t] - a1[t] * yt + s2
        s2 = b2[t] * x[t] - a2[t] * yt
        y[t] = yt
    return y


@njit(cache=True)
def run_waveguide(
    source,        # (n,) glottal + aspiration injection at the glottis
    fric,          # (n,) band-passed fricative noise, volume applied
    fric_idx,      # (n,) int64 oral section receiving the injection
    oral_areas,    # (n, 8) cm^2
    velum_area,    # (n,) cm^2, admittance of the nasal port
    nasal_areas,   # (5,) cm^2
    r_glottis,     # reflection at the glottal end
    mouth_coeff,
    mouth_alpha,   # one-pole coefficient of the lip reflection lowpass
    nose_coeff,
    nose_alpha,
    throat_gain,
    throat_alpha,
    damping,
    fwd,           # (8,) oral state, mutated in place
    bwd,           # (8,)
    nfwd,          # (6,) velum section + 5 nasal sections
    nbwd,          # (6,)
):
    """Step the waveguide over all samples; returns the raw output signal."""
    n = source.shape[0]
    out = np.empty(n)

    f_in = np.zeros(8)
    b_in = np.zeros(8)
    nf_in = np.zeros(6)
    nb_in = np.zeros(6)

    # fixed nasal junction coefficients between the 5 fixed sections
    kn = np.empty(4)
    for j in range(4):
        al = max(nasal_areas[j], _AREA_EPS)
        ar = max(nasal_areas[j + 1], _AREA_EPS)
        kn[j] = (al - ar) / (al + ar)
    area_n1 = max(nasal_areas[0], _AREA_EPS)

    lip_lp = 0.0
    lip_prev = 0.0
    nose_lp = 0.0
    nose_prev = 0.0
    throat_lp = 0.0

    for t in range(n):
        # glottal end: stiff reflection plus source injection
        f_in[0] = r_glottis * bwd[0] + source[t]

        for i in range(7):
            al = oral_areas[t, i]
            ar = oral_areas[t, i + 1]
            if al < _AREA_EPS:
                al = _AREA_EPS
            if ar < _AREA_EPS:
                ar = _AREA_EPS
            if i == VELUM_JUNCTION:
                yn = velum_area[t]
                total = al + ar + yn
                pj = 2.0 * (al * fwd[i] + ar * bwd[i + 1] + yn * nbwd[0]) / total
                b_in[i] = pj - fwd[i]
                f_in[i + 1] = pj - bwd[i + 1]
                nf_in[0] = pj - nbwd[0]
            else:
                k = (al - ar) / (al + ar)
                f_in[i + 1] = (1.0 + k) * fwd[i] - k * bwd[i + 1]
                b_in[i] = k * fwd[i] + (1.0 - k) * bwd[i + 1]

        f_in[fric_idx[t]] += fric[t]

        # lip termination: lowpassed partial reflection + first-difference
        # radiation of the transmitted pressure
        lip_lp += mouth_alpha * (fwd[7] - lip_lp)
        b_in[7] = -mouth_coeff * lip_lp
        lip_p = fwd[7] - mouth_coeff * lip_lp
        rad_lip = lip_p - lip_prev
        lip_prev = lip_p

        # velum coupling section into the first fixed nasal section
        av = velum_area[t]
        if av < _AREA_EPS:
            av = _AREA_EPS if velum_area[t] > 0.0 else 0.0
        kv = (av - area_n1) / (av + area_n1)
        nf_in[1] = (1.0 + kv) * nfwd[0] - kv * nbwd[1]
        nb_in[0] = kv * nfwd[0] + (1.0 - kv) * nbwd[1]

        for j in range(4):
            k = kn[j]
            nf_in[j + 2] = (1.0 + k) * nfwd[j + 1] - k * nbwd[j + 2]
            nb_in[j + 1] = k * nfwd[j + 1] + (1.0 - k) * nbwd[j + 2]

        nose_lp += nose_alpha * (nfwd[5] - nose_lp)
        nb_in[5] = -nose_coeff * nose_lp
        nose_p = nfwd[5] - nose_coeff * nose_lp
        rad_nose = nose_p - nose_prev
        nose_prev = nose_p

        throat_lp += throat_alpha * (bwd[0] - throat_lp)

        for i in range(8):
            fwd[i] = damping * f_in[i]
            bwd[i] = damping * b_in[i]
        for i in range(6):
            nfwd[i] = damping * nf_in[i]
            nbwd[i] = damping * nb_in[i]

        out[t] = rad_lip + rad_nose + throat_gain * throat_lp

    return out
