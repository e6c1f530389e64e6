import dataclasses

import numpy as np
import pytest

from emssl.trm import UtteranceParams, glottal_source
from emssl.trm.glottal import pulse_shape


class TestGlottalSource:
    def test_exact_period_no_breathiness(self):
        u = dataclasses.replace(UtteranceParams(), breathiness_pct=0.0)
        x = glottal_source(u, 100.0, 16000)
        # period = 16000 / 100 = 160 samples
        assert np.max(np.abs(x[160:] - x[:-160])) < 1e-9

    def test_zero_mean_over_whole_periods(self):
        u = dataclasses.replace(UtteranceParams(), breathiness_pct=0.0)
        x = glottal_source(u, 100.0, 16000)
        for k in (1, 5, 50, 100):
            assert abs(np.mean(x[: k * 160])) < 1e-6

    def test_full_breathiness_is_noise(self):
        u = dataclasses.replace(UtteranceParams(), breathiness_pct=100.0)
        x = glottal_source(u, 100.0, 32000, seed=7)
        lag = 160
        a, b = x[:-lag], x[lag:]
        r = np.corrcoef(a, b)[0, 1]
        assert abs(r) < 0.3

    def test_fundamental_matches_additive_oracle(self):
        # oracle: continuous Fourier coefficient of the analytic pulse shape
        # by dense quadrature, independent of the generation path
        u = dataclasses.replace(UtteranceParams(), breathiness_pct=0.0)
        tp, tn = u.glottal_pulse_tp, u.glottal_pulse_tn_min
        tt = np.linspace(0.0, 1.0, 200001)
        shape = pulse_shape(tt, tp, tn)
        shape = shape - np.trapezoid(shape, tt)
        c1 = np.trapezoid(shape * np.exp(-2j * np.pi * tt), tt)
        oracle_amp = 2.0 * np.abs(c1)

        pitch, sr, dur = 100.0, 16000.0, 1.0
        x = glottal_source(u, pitch, int(sr * dur))
        spec = np.abs(np.fft.rfft(x)) * 2.0 / x.size
        gen_amp = spec[int(round(pitch * dur))]
        assert abs(20 * np.log10(gen_amp / oracle_amp)) < 3.0

    def test_pitch_bounds(self):
        u = UtteranceParams()
        with pytest.raises(ValueError):
            glottal_source(u, 30.0, 100)
        with pytest.raises(ValueError):
            glottal_source(u, 700.0, 100)

    def test_seed_determinism(self):
        u = dataclasses.replace(UtteranceParams(), breathiness_pct=40.0)
        a = glottal_source(u, 120.0, 8000, seed=3)
        b = glottal_source(u, 120.0, 8000, seed=3)
        assert np.array_equal(a, b)

    def test_sine_debug_source(self):
        u = dataclasses.replace(
            UtteranceParams(), glottal_waveform=1, breathiness_pct=0.0
        )
        x = glottal_source(u, 100.0, 16000)
        spec = np.abs(np.fft.rfft(x))
        assert np.argmax(spec) == 100  # 1 Hz bins over 1 s
