import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from emssl.features import (
    FFT_SIZE,
    HOP_LENGTH,
    LOG_FLOOR,
    N_MELS,
    MelSpectrogram,
    hz_to_mel,
    log_mel,
    mel_filterbank,
    mel_to_hz,
    resample,
    stft_magnitude,
)
from emssl.trm import Waveform


def sine(freq, sr, dur, amp=1.0):
    t = np.arange(int(round(dur * sr))) / sr
    return Waveform(sample_rate_hz=sr, samples=amp * np.sin(2 * np.pi * freq * t))


class TestResample:
    def test_same_rate_identity(self):
        w = Waveform(16000, np.random.default_rng(0).normal(size=1000))
        out = resample(w, 16000)
        assert np.array_equal(out.samples, w.samples)

    def test_sine_downsample_peak(self):
        # 1 kHz at 32 kHz -> 16 kHz; dominant bin within 1 bin of a 4096-FFT
        w = sine(1000.0, 32000.0, 0.5)
        out = resample(w, 16000.0)
        spec = np.abs(np.fft.rfft(out.samples[:4096] * np.hanning(4096)))
        peak_bin = int(np.argmax(spec))
        expect = 1000.0 * 4096 / 16000.0
        assert abs(peak_bin - expect) <= 1.0

    def test_dc_preserved(self):
        w = Waveform(32000, np.full(3200, 0.5))
        out = resample(w, 16000.0)
        assert np.all(np.abs(out.samples - 0.5) < 1e-3)

    def test_duration_preserved(self):
        w = Waveform(8000, np.zeros(8000))
        out = resample(w, 16000.0)
        assert abs(out.samples.size / 16000.0 - 1.0) <= 1.0 / 16000.0

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            resample(Waveform(16000, np.zeros(0)), 8000.0)


class TestStft:
    def test_zero_signal(self):
        mag = stft_magnitude(Waveform(16000, np.zeros(1600)))
        assert np.allclose(mag, 0.0)

    def test_sine_argmax_bin(self):
        # bin = round(1000 * 1024 / 16000) = 64
        mag = stft_magnitude(sine(1000.0, 16000.0, 1.0))
        assert np.all(np.argmax(mag, axis=1) == 64)

    def test_frame_count_3200(self):
        mag = stft_magnitude(Waveform(16000, np.zeros(3200)))
        assert mag.shape == (16, FFT_SIZE // 2 + 1)

    @given(st.integers(min_value=1, max_value=20000))
    @settings(max_examples=40, deadline=None)
    def test_frame_count_law(self, n):
        mag = stft_magnitude(Waveform(16000, np.zeros(n)))
        assert mag.shape[0] == int(np.ceil(n / HOP_LENGTH))

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            stft_magnitude(Waveform(16000, np.zeros(0)))

    def test_wrong_rate_rejected(self):
        with pytest.raises(ValueError):
            stft_magnitude(Waveform(8000, np.zeros(100)))


class TestMelFilterbank:
    def test_shape_and_rows(self):
        fb = mel_filterbank()
        assert fb.shape == (80, 513)
        assert np.all(fb >= 0)
        for row in fb:
            assert row.max() == pytest.approx(1.0)
            # unimodal: once it starts falling it never rises again
            d = np.diff(row[row > 0])
            if d.size:
                falling = np.flatnonzero(d < -1e-12)
                rising = np.flatnonzero(d > 1e-12)
                if falling.size and rising.size:
                    assert rising.max() < falling.min()

    def test_centers_strictly_increasing(self):
        centers = mel_to_hz(np.linspace(hz_to_mel(0), hz_to_mel(8000), N_MELS + 2))[1:-1]
        assert np.all(np.diff(centers) > 0)
        # argmax bins of the rows are non-decreasing and span the band
        fb = mel_filterbank()
        arg = np.argmax(fb, axis=1)
        assert np.all(np.diff(arg) >= 0)

    def test_each_bin_touched_by_at_most_two_filters(self):
        fb = mel_filterbank()
        assert np.all((fb > 0).sum(axis=0) <= 2)

    def test_tone_at_center_maximizes_its_bin(self):
        centers = mel_to_hz(np.linspace(hz_to_mel(0), hz_to_mel(8000), N_MELS + 2))[1:-1]
        for j in range(0, N_MELS, 7):
            f = centers[j]
            if f < 30 or f > 7900:
                continue
            mel = log_mel(sine(f, 16000.0, 0.3)).values.mean(axis=0)
            assert int(np.argmax(mel)) in (j - 1, j, j + 1)


class TestLogMel:
    def test_zero_signal_at_floor(self):
        m = log_mel(Waveform(16000, np.zeros(1600)))
        assert np.allclose(m.values, np.log(LOG_FLOOR))

    def test_log_linearity(self):
        w = sine(440.0, 16000.0, 0.5, amp=0.05)
        m1 = log_mel(w).values
        m2 = log_mel(Waveform(16000, 10.0 * w.samples)).values
        unfloored = (m1 > np.log(LOG_FLOOR) + 1e-9) & (m2 > np.log(LOG_FLOOR) + 1e-9)
        assert np.allclose(m2[unfloored] - m1[unfloored], np.log(10.0), atol=1e-6)

    def test_one_second_shape(self):
        m = log_mel(sine(500.0, 16000.0, 1.0))
        assert m.values.shape == (80, 80)

    def test_determinism(self):
        w = sine(700.0, 16000.0, 0.4, amp=0.3)
        assert np.array_equal(log_mel(w).values, log_mel(w).values)

    def test_energy_monotonicity(self):
        rng = np.random.default_rng(5)
        w = Waveform(16000, 0.1 * rng.normal(size=4000))
        m1 = log_mel(w).values
        m2 = log_mel(Waveform(16000, 3.0 * w.samples)).values
        unfloored = m1 > np.log(LOG_FLOOR)
        assert np.all(m2[unfloored] >= m1[unfloored] - 1e-12)

    def test_mel_type_invariants(self):
        with pytest.raises(ValueError):
            MelSpectrogram(values=np.zeros((0, 80)))
        with pytest.raises(ValueError):
            MelSpectrogram(values=np.full((2, 80), np.nan))
