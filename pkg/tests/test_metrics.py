import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from emssl.metrics import SNR_CAP_DB, bin_snr_stats, corpus_snr, local_snr, sentence_snr


class TestSentenceSnr:
    def test_identical_hits_cap(self):
        y = np.arange(12.0).reshape(3, 4) + 1
        assert sentence_snr(y, y.copy()) == 120.0

    def test_zero_estimate_gives_zero_db(self):
        y = np.array([[1.0, -2.0], [3.0, 0.5]])
        assert sentence_snr(y, np.zeros_like(y)) == pytest.approx(0.0, abs=1e-12)

    def test_closed_form_1x1(self):
        # Y=2, Yhat=1: 10 log10(4/1)
        assert sentence_snr([[2.0]], [[1.0]]) == pytest.approx(10 * np.log10(4), abs=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            sentence_snr(np.ones((2, 3)), np.ones((3, 2)))

    @given(st.floats(min_value=1e-6, max_value=1e6), st.integers(0, 2**31 - 1))
    @settings(max_examples=30, deadline=None)
    def test_scale_invariance(self, c, seed):
        rng = np.random.default_rng(seed)
        y = rng.normal(size=(4, 5))
        yhat = y + rng.normal(scale=0.1, size=(4, 5))
        assert sentence_snr(c * y, c * yhat) == pytest.approx(
            sentence_snr(y, yhat), abs=1e-9
        )

    def test_monotone_in_single_entry_error(self):
        rng = np.random.default_rng(0)
        y = rng.normal(size=(3, 4)) + 5.0
        yhat = y + rng.normal(scale=0.5, size=(3, 4))
        closer = yhat.copy()
        closer[1, 2] = y[1, 2] + 0.5 * (yhat[1, 2] - y[1, 2])
        assert sentence_snr(y, closer) > sentence_snr(y, yhat)

    @given(st.integers(0, 2**31 - 1))
    @settings(max_examples=20, deadline=None)
    def test_permutation_invariance(self, seed):
        rng = np.random.default_rng(seed)
        y = rng.normal(size=(6, 3))
        yhat = y + rng.normal(scale=0.3, size=(6, 3))
        perm = rng.permutation(y.size)
        yp = y.ravel()[perm].reshape(y.shape)
        yhp = yhat.ravel()[perm].reshape(y.shape)
        assert sentence_snr(yp, yhp) == pytest.approx(sentence_snr(y, yhat), abs=1e-9)
        assert np.allclose(
            np.sort(local_snr(yp, yhp).ravel()), np.sort(local_snr(y, yhat).ravel())
        )


class TestLocalSnr:
    def test_unit_ratio_zero_db(self):
        out = local_snr([[1.0]], [[0.0]])
        assert out[0, 0] == pytest.approx(0.0, abs=1e-12)

    def test_exact_match_cap(self):
        out = local_snr([[3.0, -2.0]], [[3.0, -2.0]])
        assert np.all(out == 120.0)

    def test_closed_form(self):
        # |1| / |1 - 0.9| = 10 -> 20 dB
        out = local_snr([[1.0]], [[0.9]])
        assert out[0, 0] == pytest.approx(20.0, abs=1e-9)

    def test_zero_reference_sentinel(self):
        out = local_snr([[0.0, 0.0]], [[1.0, 0.0]])
        assert out[0, 0] == -120.0
        assert out[0, 1] == 120.0  # 0/0 -> exact match cap


class TestBinSnrStats:
    def test_constant_column(self):
        mat = np.full((7, 80), 30.0)
        stats = bin_snr_stats(mat)
        assert np.all(stats.median == 30.0)
        assert np.all(stats.p25 == 30.0)
        assert np.all(stats.p75 == 30.0)
        assert all(len(o) == 0 for o in stats.outliers)

    def test_odd_length_quantiles(self):
        col = np.array([0.0, 10.0, 20.0, 30.0, 40.0])
        mat = np.tile(col[:, None], (1, 80))
        stats = bin_snr_stats(mat)
        assert stats.median[0] == 20.0
        assert stats.p25[0] == 10.0
        assert stats.p75[0] == 30.0

    def test_truncation_before_statistics(self):
        col = np.array([50.0, 55.0, 100.0, 58.0, 52.0])
        mat = np.tile(col[:, None], (1, 80))
        stats = bin_snr_stats(mat)
        # 100 truncated to 60 before quantiles
        assert stats.p75[0] <= 60.0
        assert stats.whisker_hi[0] <= 60.0

    def test_ordering_invariant(self):
        rng = np.random.default_rng(3)
        stats = bin_snr_stats(rng.normal(20, 15, size=(50, 80)))
        assert np.all(stats.p25 <= stats.median)
        assert np.all(stats.median <= stats.p75)
        assert np.all(stats.whisker_lo >= -20.0)
        assert np.all(stats.whisker_hi <= 60.0)


class TestCorpusSnr:
    def test_single_pair_zero_std(self):
        y = np.ones((2, 2))
        yhat = y + 0.1
        mean, std = corpus_snr([(y, yhat)])
        assert std == 0.0

    def test_two_pairs_arithmetic(self):
        # construct pairs with sentence SNR exactly 10 and 20 dB
        y = np.ones((1, 1))
        p10 = (y, y - np.sqrt(10 ** (-1.0)))
        p20 = (y, y - np.sqrt(10 ** (-2.0)))
        mean, std = corpus_snr([p10, p20])
        assert mean == pytest.approx(15.0, abs=1e-9)
        assert std == pytest.approx(5.0, abs=1e-9)

    def test_identical_pairs_cap(self):
        y = np.arange(6.0).reshape(2, 3)
        mean, std = corpus_snr([(y, y.copy())] * 3)
        assert mean == SNR_CAP_DB
        assert std == 0.0
