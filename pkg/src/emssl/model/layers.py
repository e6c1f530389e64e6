"""Differentiable primitives with hand-written backward passes.

All layers work on padded batches (B, N, C) with an explicit frame mask
(B, N); outputs at padded frames are forced to zero so downstream windows
never see stale values and results match a per-sequence computation exactly.
Every forward returns (output, cache) and the matching backward consumes the
upstream gradient plus that cache.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "conv1d_forward",
    "conv1d_backward",
    "downsample2_lengths",
    "upsample2_forward",
    "upsample2_backward",
    "relu_forward",
    "relu_backward",
    "linear_forward",
    "linear_backward",
    "tanh_forward",
    "tanh_backward",
    "lstm_forward",
    "lstm_backward",
    "mask_from_lengths",
]


def mask_from_lengths(lengths: np.ndarray, n: int, dtype=np.float64) -> np.ndarray:
    return (np.arange(n)[None, :] < np.asarray(lengths)[:, None]).astype(dtype)


def _im2col(x: np.ndarray) -> np.ndarray:
    """(B, N, C) -> (B, N, 3C) windows with zero same-padding, kernel 3."""
    xp = np.pad(x, ((0, 0), (1, 1), (0, 0)))
    return np.concatenate([xp[:, :-2], xp[:, 1:-1], xp[:, 2:]], axis=2)


def conv1d_forward(x, w, b, mask, stride: int = 1):
    """Kernel-3 convolution, weights (O, 3C).  stride 2 keeps ceil(N/2)
    frames (centres at even positions); the output is masked per sequence."""
    cols = _im2col(x)
    if stride == 2:
        cols = cols[:, ::2]
        mask_out = mask[:, ::2]
    elif stride == 1:
        mask_out = mask
    else:
        raise ValueError("stride must be 1 or 2")
    y = (cols @ w.T + b) * mask_out[:, :, None]
    cache = (cols, x.shape, w, mask_out, stride)
    return y, mask_out, cache


def conv1d_backward(dy, cache):
    cols, xshape, w, mask_out, stride = cache
    dy = dy * mask_out[:, :, None]
    dw = np.einsum("bno,bnk->ok", dy, cols)
    db = dy.sum(axis=(0, 1))
    dcols = dy @ w
    B, N, C = xshape
    dxp = np.zeros((B, N + 2, C), dtype=dy.dtype)
    if stride == 2:
        full = np.zeros((B, (N + 1) // 2 * 2, 3 * C), dtype=dy.dtype)
        full[:, : dcols.shape[1] * 2 : 2] = dcols
        dcols = full[:, :N]
    dxp[:, :-2] += dcols[:, :, :C]
    dxp[:, 1:-1] += dcols[:, :, C : 2 * C]
    dxp[:, 2:] += dcols[:, :, 2 * C :]
    return dxp[:, 1:-1], dw, db


def downsample2_lengths(lengths: np.ndarray) -> np.ndarray:
    return (np.asarray(lengths) + 1) // 2


def upsample2_forward(x, n_target: int, mask_target):
    """Nearest-neighbour x2 along time, trimmed to n_target and masked."""
    y = np.repeat(x, 2, axis=1)[:, :n_target] * mask_target[:, :, None]
    return y, (x.shape, n_target, mask_target)


def upsample2_backward(dy, cache):
    xshape, n_target, mask_target = cache
    dy = dy * mask_target[:, :, None]
    B, L, C = xshape
    full = np.zeros((B, 2 * L, C), dtype=dy.dtype)
    full[:, :n_target] = dy
    return full.reshape(B, L, 2, C).sum(axis=2)


def relu_forward(x):
    y = np.maximum(x, 0.0)
    return y, (x > 0)


def relu_backward(dy, cache):
    return dy * cache


def linear_forward(x, w, b):
    """x (..., C) @ w (O, C).T + b."""
    return x @ w.T + b, (x, w)


def linear_backward(dy, cache):
    x, w = cache
    flat_x = x.reshape(-1, x.shape[-1])
    flat_dy = dy.reshape(-1, dy.shape[-1])
    dw = flat_dy.T @ flat_x
    db = flat_dy.sum(axis=0)
    dx = dy @ w
    return dx, dw, db


def tanh_forward(x):
    y = np.tanh(x)
    return y, y


def tanh_backward(dy, y):
    return dy * (1.0 - y * y)


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def lstm_forward(x, wx, wh, b):
    """Unidirectional LSTM over (B, N, C).

    Gate order [i, f, g, o]; wx (4H, C), wh (4H, H), b (4H,).  Returns the
    hidden sequence (B, N, H), the cell sequence (B, N, H), and a cache for
    full backpropagation through time.
    """
    B, N, C = x.shape
    H = wh.shape[1]
    h = np.zeros((B, H), dtype=x.dtype)
    c = np.zeros((B, H), dtype=x.dtype)
    hs = np.empty((B, N, H), dtype=x.dtype)
    cs = np.empty((B, N, H), dtype=x.dtype)
    gates = np.empty((B, N, 4 * H), dtype=x.dtype)
    pre_x = x @ wx.T + b
    for t in range(N):
        z = pre_x[:, t] + h @ wh.T
        i = _sigmoid(z[:, :H])
        f = _sigmoid(z[:, H : 2 * H])
        g = np.tanh(z[:, 2 * H : 3 * H])
        o = _sigmoid(z[:, 3 * H :])
        c = f * c + i * g
        h = o * np.tanh(c)
        gates[:, t, :H] = i
        gates[:, t, H : 2 * H] = f
        gates[:, t, 2 * H : 3 * H] = g
        gates[:, t, 3 * H :] = o
        hs[:, t] = h
        cs[:, t] = c
    cache = (x, wx, wh, gates, cs, hs)
    return hs, cs, cache


def lstm_backward(dh_seq, dc_inject, cache):
    """BPTT.  `dh_seq` is the gradient wrt every hidden output; `dc_inject`
    adds gradient directly on the cell state at chosen steps (used for the
    final-cell-state readout)."""
    x, wx, wh, gates, cs, hs = cache
    B, N, C = x.shape
    H = wh.shape[1]
    dwx = np.zeros_like(wx)
    dwh = np.zeros_like(wh)
    db = np.zeros(4 * H, dtype=x.dtype)
    dx = np.zeros_like(x)
    dh_next = np.zeros((B, H), dtype=x.dtype)
    dc_next = np.zeros((B, H), dtype=x.dtype)
    for t in range(N - 1, -1, -1):
        i = gates[:, t, :H]
        f = gates[:, t, H : 2 * H]
        g = gates[:, t, 2 * H : 3 * H]
        o = gates[:, t, 3 * H :]
        c = cs[:, t]
        c_prev = cs[:, t - 1] if t > 0 else np.zeros_like(c)
        h_prev = hs[:, t - 1] if t > 0 else np.zeros((B, H), dtype=x.dtype)
        tc = np.tanh(c)
        dh = dh_seq[:, t] + dh_next
        dc = dc_next + dh * o * (1.0 - tc * tc)
        if dc_inject is not None:
            dc = dc + dc_inject[:, t]
        do = dh * tc
        di = dc * g
        dg = dc * i
        df = dc * c_prev
        dz = np.concatenate(
            [
                di * i * (1.0 - i),
                df * f * (1.0 - f),
                dg * (1.0 - g * g),
                do * o * (1.0 - o),
            ],
            axis=1,
        )
        dwx += dz.T @ x[:, t]
        dwh += dz.T @ h_prev
        db += dz.sum(axis=0)
        dx[:, t] = dz @ wx
        dh_next = dz @ wh
        dc_next = dc * f
    return dx, dwx, dwh, db
