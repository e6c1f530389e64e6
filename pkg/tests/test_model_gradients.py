"""Finite-difference verification of every hand-written backward pass."""

import numpy as np
import pytest

from emssl.model import ModelConfig, init_model
from emssl.model.layers import (
    conv1d_backward,
    conv1d_forward,
    linear_backward,
    linear_forward,
    lstm_backward,
    lstm_forward,
    mask_from_lengths,
    tanh_backward,
    tanh_forward,
    upsample2_backward,
    upsample2_forward,
)

H_FD = 1e-4
REL_TOL = 1e-4


def rel_err(a, b):
    denom = np.maximum(np.abs(a) + np.abs(b), 1e-8)
    return np.max(np.abs(a - b) / denom)


def fd_grad(f, arr):
    """Central finite differences of scalar f with respect to arr."""
    g = np.zeros_like(arr)
    it = np.nditer(arr, flags=["multi_index"])
    while not it.finished:
        ix = it.multi_index
        orig = arr[ix]
        arr[ix] = orig + H_FD
        hi = f()
        arr[ix] = orig - H_FD
        lo = f()
        arr[ix] = orig
        g[ix] = (hi - lo) / (2 * H_FD)
        it.iternext()
    return g


class TestLayerGradients:
    def test_conv1d_stride1(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(2, 5, 3))
        w = rng.normal(size=(4, 9), scale=0.5)
        b = rng.normal(size=4)
        mask = mask_from_lengths(np.array([5, 3]), 5)
        r = rng.normal(size=(2, 5, 4))

        def loss():
            y, _, _ = conv1d_forward(x, w, b, mask)
            return float(np.sum(y * r))

        y, _, cache = conv1d_forward(x, w, b, mask)
        dx, dw, db = conv1d_backward(r.copy(), cache)
        assert rel_err(dx, fd_grad(loss, x)) < REL_TOL
        assert rel_err(dw, fd_grad(loss, w)) < REL_TOL
        assert rel_err(db, fd_grad(loss, b)) < REL_TOL

    def test_conv1d_stride2(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(2, 7, 3))
        w = rng.normal(size=(4, 9), scale=0.5)
        b = rng.normal(size=4)
        mask = mask_from_lengths(np.array([7, 4]), 7)
        r = rng.normal(size=(2, 4, 4))

        def loss():
            y, _, _ = conv1d_forward(x, w, b, mask, stride=2)
            return float(np.sum(y * r))

        _, _, cache = conv1d_forward(x, w, b, mask, stride=2)
        dx, dw, db = conv1d_backward(r.copy(), cache)
        assert rel_err(dx, fd_grad(loss, x)) < REL_TOL
        assert rel_err(dw, fd_grad(loss, w)) < REL_TOL
        assert rel_err(db, fd_grad(loss, b)) < REL_TOL

    def test_upsample2(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(2, 4, 3))
        mask = mask_from_lengths(np.array([7, 5]), 7)
        r = rng.normal(size=(2, 7, 3))

        def loss():
            y, _ = upsample2_forward(x, 7, mask)
            return float(np.sum(y * r))

        _, cache = upsample2_forward(x, 7, mask)
        dx = upsample2_backward(r.copy(), cache)
        assert rel_err(dx, fd_grad(loss, x)) < REL_TOL

    def test_linear(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(4, 6))
        w = rng.normal(size=(3, 6))
        b = rng.normal(size=3)
        r = rng.normal(size=(4, 3))

        def loss():
            y, _ = linear_forward(x, w, b)
            return float(np.sum(y * r))

        _, cache = linear_forward(x, w, b)
        dx, dw, db = linear_backward(r.copy(), cache)
        assert rel_err(dx, fd_grad(loss, x)) < REL_TOL
        assert rel_err(dw, fd_grad(loss, w)) < REL_TOL
        assert rel_err(db, fd_grad(loss, b)) < REL_TOL

    def test_tanh(self):
        rng = np.random.default_rng(4)
        x = rng.normal(size=(3, 4))
        r = rng.normal(size=(3, 4))

        def loss():
            y, _ = tanh_forward(x)
            return float(np.sum(y * r))

        _, cache = tanh_forward(x)
        dx = tanh_backward(r.copy(), cache)
        assert rel_err(dx, fd_grad(loss, x)) < REL_TOL

    def test_lstm_bptt(self):
        rng = np.random.default_rng(5)
        B, N, C, H = 2, 5, 3, 4
        x = rng.normal(size=(B, N, C))
        wx = rng.normal(size=(4 * H, C), scale=0.5)
        wh = rng.normal(size=(4 * H, H), scale=0.5)
        b = rng.normal(size=4 * H, scale=0.1)
        r_h = rng.normal(size=(B, N, H))
        r_c = np.zeros((B, N, H))
        r_c[:, -1] = rng.normal(size=(B, H))  # final-cell readout path

        def loss():
            hs, cs, _ = lstm_forward(x, wx, wh, b)
            return float(np.sum(hs * r_h) + np.sum(cs * r_c))

        _, _, cache = lstm_forward(x, wx, wh, b)
        dx, dwx, dwh, db = lstm_backward(r_h.copy(), r_c.copy(), cache)
        assert rel_err(dx, fd_grad(loss, x)) < REL_TOL
        assert rel_err(dwx, fd_grad(loss, wx)) < REL_TOL
        assert rel_err(dwh, fd_grad(loss, wh)) < REL_TOL
        assert rel_err(db, fd_grad(loss, b)) < REL_TOL


def tiny_batch(rng, config, lengths=(6, 4)):
    n_max = max(lengths)
    B = len(lengths)
    batch = {
        "x": rng.normal(size=(B, n_max, 80)) * mask_from_lengths(
            np.array(lengths), n_max
        )[:, :, None],
        "lengths": np.array(lengths, dtype=np.int64),
        "control_target": np.clip(
            rng.normal(size=(B, n_max, 16), scale=0.4), -0.95, 0.95
        )
        * mask_from_lengths(np.array(lengths), n_max)[:, :, None],
        "utterance_target": np.clip(rng.normal(size=(B, 13), scale=0.4), -0.95, 0.95),
    }
    return batch


class TestFullModelGradients:
    @pytest.mark.parametrize("lam", [0.001, 0.5])
    def test_tiny_model_matches_finite_differences(self, lam):
        rng = np.random.default_rng(7)
        config = ModelConfig(preset="desk", conv_channels=(3, 4), hidden_size=3, seed=1)
        model = init_model(config, dtype=np.float64)
        batch = tiny_batch(rng, config)
        _, grads = model.loss_and_grad(batch, lam)

        for name, arr in model.params.items():
            def loss():
                breakdown, _ = model.loss_and_grad(batch, lam)
                return breakdown.total

            fd = fd_grad(loss, arr)
            assert rel_err(grads[name], fd) < REL_TOL, f"gradient mismatch in {name}"

    def test_zero_loss_zero_grads(self):
        rng = np.random.default_rng(8)
        config = ModelConfig(preset="desk", conv_channels=(3, 4), hidden_size=3, seed=2)
        model = init_model(config, dtype=np.float64)
        batch = tiny_batch(rng, config)
        control, utterance, cache = model._forward_batch(batch["x"], batch["lengths"])
        batch["control_target"] = control
        batch["utterance_target"] = utterance
        breakdown, grads = model.loss_and_grad(batch, 0.5)
        assert breakdown.utterance == 0.0
        assert breakdown.control == 0.0
        assert all(np.allclose(g, 0.0) for g in grads.values())

    def test_lambda_zero_total_is_utterance(self):
        rng = np.random.default_rng(9)
        config = ModelConfig(preset="desk", conv_channels=(3, 4), hidden_size=3, seed=3)
        model = init_model(config, dtype=np.float64)
        breakdown, _ = model.loss_and_grad(tiny_batch(rng, config), 0.0)
        assert breakdown.total == breakdown.utterance
