import dataclasses

import numpy as np
import pytest

from emssl.trm import (
    N_NASAL_SECTIONS,
    N_ORAL_SECTIONS,
    UtteranceParams,
    reflection_coefficient,
    validate_and_build_tube,
)
from emssl.trm.tube import run_waveguide


class TestBuildTube:
    def test_uniform_radii_zero_reflection(self):
        tube = validate_and_build_tube(UtteranceParams(), np.ones(8))
        assert np.allclose(tube.oral_reflections, 0.0)

    def test_closed_section_full_reflection(self):
        radii = np.ones(8)
        radii[4] = 0.0
        tube = validate_and_build_tube(UtteranceParams(), radii)
        assert tube.oral_reflections[3] == pytest.approx(1.0)

    def test_closed_form_sqrt2(self):
        # areas pi and 2*pi -> k = -1/3
        assert reflection_coefficient(np.pi, 2 * np.pi) == pytest.approx(-1.0 / 3.0)

    def test_section_counts_and_zeroed_lines(self):
        tube = validate_and_build_tube(UtteranceParams())
        assert tube.oral_areas_cm2.shape == (N_ORAL_SECTIONS,)
        assert tube.nasal_areas_cm2.shape == (N_NASAL_SECTIONS,)
        assert np.all(tube.forward == 0) and np.all(tube.backward == 0)
        assert np.all(tube.nasal_forward == 0) and np.all(tube.nasal_backward == 0)

    def test_reflections_bounded(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            radii = rng.uniform(0.0, 3.0, size=8)
            tube = validate_and_build_tube(UtteranceParams(), radii)
            assert np.all(np.abs(tube.oral_reflections) <= 1.0)
            areas = np.pi * radii**2
            for i in range(7):
                if areas[i] == areas[i + 1]:
                    assert tube.oral_reflections[i] == 0.0

    def test_rejects_nonfinite_fields(self):
        u = dataclasses.replace(UtteranceParams(), breathiness_pct=np.nan)
        with pytest.raises(ValueError):
            validate_and_build_tube(u)

    def test_rejects_subsample_section_delay(self):
        # at 4 kHz output even the longest valid tract rounds below one
        # sample of per-section delay
        u = dataclasses.replace(UtteranceParams(), sample_rate_hz=4000.0)
        with pytest.raises(ValueError, match="delay"):
            validate_and_build_tube(u)

    def test_rejects_out_of_range_length(self):
        with pytest.raises(ValueError):
            validate_and_build_tube(
                dataclasses.replace(UtteranceParams(), tract_length_cm=9.0)
            )

    def test_rejects_bad_pulse_timing(self):
        u = dataclasses.replace(
            UtteranceParams(), glottal_pulse_tp=0.8, glottal_pulse_tn_min=0.4
        )
        with pytest.raises(ValueError):
            validate_and_build_tube(u)


def impulse_resonances(length_cm: float, n_fft: int = 16384):
    """Oracle helper: uniform-tube impulse response peak frequencies."""
    import dataclasses

    from scipy.signal import find_peaks

    u = dataclasses.replace(UtteranceParams(), tract_length_cm=length_cm)
    tube = validate_and_build_tube(u)
    sr = tube.internal_rate_hz
    n = n_fft
    source = np.zeros(n)
    source[0] = 1.0
    zeros = np.zeros(n)
    areas = np.full((n, 8), np.pi)
    c = tube.speed_of_sound_cm_s
    alpha = 1.0 - np.exp(-2 * np.pi * min(c / (2 * np.pi * 1.2), 0.45 * sr) / sr)
    throat_alpha = 1.0 - np.exp(-2 * np.pi * 1500.0 / sr)
    out = run_waveguide(
        source, zeros, zeros.astype(np.int64), areas, zeros,
        tube.nasal_areas_cm2, 0.75, 0.9, alpha, 0.9, alpha, 0.0, throat_alpha,
        tube.damping, tube.forward, tube.backward,
        tube.nasal_forward, tube.nasal_backward,
    )
    spec = 20 * np.log10(np.abs(np.fft.rfft(out)) + 1e-12)
    freqs = np.fft.rfftfreq(n, 1.0 / sr)
    peaks, _ = find_peaks(spec, distance=int(200 * n / sr))
    return freqs[peaks], sr


class TestResonanceOracle:
    @pytest.mark.parametrize("length_cm", [14.0, 16.0, 17.5, 18.5, 20.0])
    def test_quarter_wave_formants(self, length_cm):
        # quarter-wavelength formula c (2k - 1) / (4 L), c ~ 350 m/s
        c = 35000.0
        peaks, _ = impulse_resonances(length_cm)
        for k in (1, 2, 3):
            expect = c * (2 * k - 1) / (4.0 * length_cm)
            nearest = peaks[np.argmin(np.abs(peaks - expect))]
            assert abs(nearest - expect) <= 0.15 * expect, (
                f"L={length_cm}: formant {k} at {nearest:.0f}, expected {expect:.0f}"
            )
