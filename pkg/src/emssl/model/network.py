"""The mel -> articulatory-parameter inference network.

Length-conserving convolution stack (stride-2 down path mirrored by a
nearest-neighbour up path with skip connections), a bidirectional LSTM, and
two tanh linear heads: per-frame control parameters from the hidden
sequence, global utterance parameters from the concatenated final cell
states.  Everything runs on padded batches with per-sequence lengths, and
outputs on real frames are exactly what a per-sequence computation would
produce.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import MEL_BINS, N_CONTROL_OUT, N_UTTERANCE_OUT, ModelConfig
from .layers import (
    conv1d_backward,
    conv1d_forward,
    downsample2_lengths,
    linear_backward,
    linear_forward,
    lstm_backward,
    lstm_forward,
    mask_from_lengths,
    relu_backward,
    relu_forward,
    tanh_backward,
    tanh_forward,
    upsample2_backward,
    upsample2_forward,
)

__all__ = ["RegressorModel", "LossBreakdown", "init_model"]


@dataclass
class LossBreakdown:
    """Utterance-rate and control-rate mean square errors."""

    utterance: float
    control: float
    weight: float

    @property
    def total(self) -> float:
        return self.utterance + self.weight * self.control


def _reverse_by_length(x: np.ndarray, lengths: np.ndarray) -> np.ndarray:
    """Reverse each sequence within its true length (pads stay in place)."""
    B, N = x.shape[:2]
    t = np.arange(N)[None, :]
    idx = np.where(t < lengths[:, None], lengths[:, None] - 1 - t, t)
    return x[np.arange(B)[:, None], idx]


class RegressorModel:
    """Trainable inference network with explicit parameters and Adam state."""

    model_class = "speech"

    def __init__(self, config: ModelConfig, params: dict[str, np.ndarray]):
        self.config = config
        self.params = params
        self.adam_m = {k: np.zeros_like(v) for k, v in params.items()}
        self.adam_v = {k: np.zeros_like(v) for k, v in params.items()}
        self.step_count = 0

    # -- construction ------------------------------------------------------

    @classmethod
    def initialize(cls, config: ModelConfig, dtype=np.float32) -> "RegressorModel":
        """Zero-mean uniform fan-in init, biases zero, seeded."""
        rng = np.random.default_rng(config.seed)
        params: dict[str, np.ndarray] = {}

        def add(name, shape, fan_in):
            # variance-preserving uniform fan-in bound (keeps activations
            # O(1) through the ReLU stack)
            bound = np.sqrt(6.0 / fan_in)
            params[name + ".w"] = rng.uniform(-bound, bound, size=shape).astype(dtype)
            params[name + ".b"] = np.zeros(shape[0], dtype=dtype)

        ch = config.conv_channels
        k = config.kernel_width
        add("stem", (ch[0], k * MEL_BINS), k * MEL_BINS)
        for j in range(1, len(ch)):
            add(f"down{j}", (ch[j], k * ch[j - 1]), k * ch[j - 1])
        add("mid", (ch[-1], k * ch[-1]), k * ch[-1])
        for j in range(len(ch) - 1, 0, -1):
            c_in = ch[j] + ch[j - 1]
            add(f"up{j}", (ch[j - 1], k * c_in), k * c_in)
        H = config.hidden_size
        for d in ("fwd", "bwd"):
            bound = 1.0 / np.sqrt(H)
            params[f"lstm_{d}.wx"] = rng.uniform(-bound, bound, (4 * H, ch[0])).astype(dtype)
            params[f"lstm_{d}.wh"] = rng.uniform(-bound, bound, (4 * H, H)).astype(dtype)
            params[f"lstm_{d}.b"] = np.zeros(4 * H, dtype=dtype)
        add("head_control", (N_CONTROL_OUT, 2 * H), 2 * H)
        add("head_utterance", (N_UTTERANCE_OUT, 2 * H), 2 * H)
        return cls(config, params)

    def astype(self, dtype) -> "RegressorModel":
        clone = RegressorModel(
            self.config, {k: v.astype(dtype) for k, v in self.params.items()}
        )
        clone.adam_m = {k: v.astype(dtype) for k, v in self.adam_m.items()}
        clone.adam_v = {k: v.astype(dtype) for k, v in self.adam_v.items()}
        clone.step_count = self.step_count
        return clone

    def n_parameters(self) -> int:
        return sum(v.size for v in self.params.values())

    # -- forward -----------------------------------------------------------

    def _forward_batch(self, x, lengths):
        """x (B, N, 80) padded raw mel, lengths (B,).

        Returns (control (B, N, 16), utterance (B, 13), cache).
        """
        p = self.params
        cfg = self.config
        if x.ndim != 3 or x.shape[2] != MEL_BINS:
            raise ValueError(f"expected (B, N, {MEL_BINS}) input, got {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ValueError("non-finite values in network input")
        lengths = np.asarray(lengths, dtype=np.int64)
        if np.any(lengths < cfg.min_frames):
            raise ValueError(
                f"sequences must have at least {cfg.min_frames} frames for "
                f"down/up depth {cfg.depth}"
            )
        B, N, _ = x.shape
        dtype = p["stem.w"].dtype
        x = x.astype(dtype, copy=False)

        depth = cfg.depth
        masks = [mask_from_lengths(lengths, N, dtype)]
        lens = [lengths]
        for j in range(1, depth + 1):
            lens.append(downsample2_lengths(lens[-1]))
            masks.append(
                mask_from_lengths(lens[-1], (masks[-1].shape[1] + 1) // 2, dtype)
            )

        xn = (x - cfg.mel_mean) / cfg.mel_std * masks[0][:, :, None]
        cache: dict = {"masks": masks, "lens": lens}

        h, _, cache["stem"] = conv1d_forward(xn, p["stem.w"], p["stem.b"], masks[0])
        h, cache["stem_relu"] = relu_forward(h)
        acts = [h]
        for j in range(1, depth + 1):
            h, _, cache[f"down{j}"] = conv1d_forward(
                h, p[f"down{j}.w"], p[f"down{j}.b"], masks[j - 1], stride=2
            )
            h, cache[f"down{j}_relu"] = relu_forward(h)
            acts.append(h)

        h, _, cache["mid"] = conv1d_forward(h, p["mid.w"], p["mid.b"], masks[depth])
        h, cache["mid_relu"] = relu_forward(h)

        for j in range(depth, 0, -1):
            target_n = acts[j - 1].shape[1]
            h, cache[f"up{j}_us"] = upsample2_forward(h, target_n, masks[j - 1])
            h = np.concatenate([h, acts[j - 1]], axis=2)
            cache[f"up{j}_split"] = cfg.conv_channels[j]
            h, _, cache[f"up{j}"] = conv1d_forward(
                h, p[f"up{j}.w"], p[f"up{j}.b"], masks[j - 1]
            )
            h, cache[f"up{j}_relu"] = relu_forward(h)

        # bidirectional recurrence over the full-length features
        hf, cf, cache["lstm_fwd"] = lstm_forward(
            h, p["lstm_fwd.wx"], p["lstm_fwd.wh"], p["lstm_fwd.b"]
        )
        hrev_in = _reverse_by_length(h, lengths)
        hb_rev, cb, cache["lstm_bwd"] = lstm_forward(
            hrev_in, p["lstm_bwd.wx"], p["lstm_bwd.wh"], p["lstm_bwd.b"]
        )
        hb = _reverse_by_length(hb_rev, lengths)
        hcat = np.concatenate([hf, hb], axis=2) * masks[0][:, :, None]

        last = (np.arange(B), lengths - 1)
        summary = np.concatenate([cf[last], cb[last]], axis=1)
        cache["summary_index"] = last

        zc, cache["head_control"] = linear_forward(
            hcat, p["head_control.w"], p["head_control.b"]
        )
        control, cache["ctrl_tanh"] = tanh_forward(zc)
        control = control * masks[0][:, :, None]
        zu, cache["head_utterance"] = linear_forward(
            summary, p["head_utterance.w"], p["head_utterance.b"]
        )
        utterance, cache["utt_tanh"] = tanh_forward(zu)
        return control, utterance, cache

    def _backward_batch(self, dcontrol, dutterance, cache):
        """Parameter gradients given gradients on both head outputs."""
        p = self.params
        cfg = self.config
        grads: dict[str, np.ndarray] = {}
        masks = cache["masks"]
        lengths = cache["lens"][0]
        depth = cfg.depth
        H = cfg.hidden_size
        B, N = masks[0].shape
        dtype = p["stem.w"].dtype

        dzc = tanh_backward(
            np.asarray(dcontrol, dtype=dtype) * masks[0][:, :, None],
            cache["ctrl_tanh"],
        )
        dhcat, grads["head_control.w"], grads["head_control.b"] = linear_backward(
            dzc, cache["head_control"]
        )
        dhcat = dhcat * masks[0][:, :, None]
        dzu = tanh_backward(np.asarray(dutterance, dtype=dtype), cache["utt_tanh"])
        dsummary, grads["head_utterance.w"], grads["head_utterance.b"] = linear_backward(
            dzu, cache["head_utterance"]
        )

        last = cache["summary_index"]
        dcf_inject = np.zeros((B, N, H), dtype=dtype)
        dcb_inject = np.zeros((B, N, H), dtype=dtype)
        dcf_inject[last] = dsummary[:, :H]
        dcb_inject[last] = dsummary[:, H:]

        dh_fwd_in, dwx, dwh, db = lstm_backward(
            dhcat[:, :, :H], dcf_inject, cache["lstm_fwd"]
        )
        grads["lstm_fwd.wx"], grads["lstm_fwd.wh"], grads["lstm_fwd.b"] = dwx, dwh, db
        dhb_rev = _reverse_by_length(dhcat[:, :, H:], lengths)
        dh_bwd_in, dwx, dwh, db = lstm_backward(dhb_rev, dcb_inject, cache["lstm_bwd"])
        grads["lstm_bwd.wx"], grads["lstm_bwd.wh"], grads["lstm_bwd.b"] = dwx, dwh, db
        dh = dh_fwd_in + _reverse_by_length(dh_bwd_in, lengths)

        dskips = [None] * (depth + 1)
        for j in range(1, depth + 1):
            dh = relu_backward(dh, cache[f"up{j}_relu"])
            dh, grads[f"up{j}.w"], grads[f"up{j}.b"] = conv1d_backward(
                dh, cache[f"up{j}"]
            )
            split = cache[f"up{j}_split"]
            dskips[j - 1] = dh[:, :, split:]
            dh = upsample2_backward(dh[:, :, :split], cache[f"up{j}_us"])

        dh = relu_backward(dh, cache["mid_relu"])
        dh, grads["mid.w"], grads["mid.b"] = conv1d_backward(dh, cache["mid"])

        for j in range(depth, 0, -1):
            if dskips[j] is not None:
                dh = dh + dskips[j]
            dh = relu_backward(dh, cache[f"down{j}_relu"])
            dh, grads[f"down{j}.w"], grads[f"down{j}.b"] = conv1d_backward(
                dh, cache[f"down{j}"]
            )
        if dskips[0] is not None:
            dh = dh + dskips[0]
        dh = relu_backward(dh, cache["stem_relu"])
        _, grads["stem.w"], grads["stem.b"] = conv1d_backward(dh, cache["stem"])
        return grads

    def forward(self, mel_values: np.ndarray):
        """Single spectrogram (N, 80) -> (control (N, 16), utterance (13,))."""
        x = np.asarray(mel_values, dtype=float)[None, :, :]
        control, utterance, _ = self._forward_batch(x, np.array([x.shape[1]]))
        return control[0].astype(np.float64), utterance[0].astype(np.float64)

    # -- engine protocol -----------------------------------------------------

    def infer(self, observation):
        """Observation -> latent pair (global vector, per-frame matrix)."""
        values = observation.values if hasattr(observation, "values") else observation
        control, utterance = self.forward(values)
        return utterance, control

    def make_batch(self, samples):
        """Pad a list of (observation, (utterance_z, control_z)) pairs."""
        xs, ctrls, utts = [], [], []
        for obs, z in samples:
            values = obs.values if hasattr(obs, "values") else np.asarray(obs)
            utt_z, ctrl_z = z
            if ctrl_z is None or np.asarray(ctrl_z).shape[0] != values.shape[0]:
                raise ValueError("control target must have one row per mel frame")
            xs.append(np.asarray(values, dtype=float))
            ctrls.append(np.asarray(ctrl_z, dtype=float))
            utts.append(np.asarray(utt_z, dtype=float))
        lengths = np.array([x.shape[0] for x in xs], dtype=np.int64)
        n_max = int(lengths.max())
        B = len(xs)
        x_pad = np.zeros((B, n_max, MEL_BINS))
        c_pad = np.zeros((B, n_max, N_CONTROL_OUT))
        for i, (x, c) in enumerate(zip(xs, ctrls)):
            x_pad[i, : x.shape[0]] = x
            c_pad[i, : c.shape[0]] = c
        return {
            "x": x_pad,
            "lengths": lengths,
            "control_target": c_pad,
            "utterance_target": np.stack(utts),
        }

    def loss_and_grad(self, batch, weight: float):
        """Masked MSE losses and gradients of utterance + weight * control."""
        x = batch["x"]
        lengths = batch["lengths"]
        ctrl_t = np.asarray(batch["control_target"])
        utt_t = np.asarray(batch["utterance_target"])
        control, utterance, cache = self._forward_batch(x, lengths)
        if control.shape != ctrl_t.shape or utterance.shape != utt_t.shape:
            raise ValueError(
                f"target shapes {ctrl_t.shape}/{utt_t.shape} do not match "
                f"predictions {control.shape}/{utterance.shape}"
            )
        mask = cache["masks"][0]
        n_ctrl = float(mask.sum()) * N_CONTROL_OUT
        err_c = (control - ctrl_t) * mask[:, :, None]
        err_u = utterance - utt_t
        loss_c = float(np.sum(err_c**2) / n_ctrl)
        loss_u = float(np.mean(err_u**2))
        dcontrol = (2.0 * weight / n_ctrl) * err_c
        dutterance = (2.0 / err_u.size) * err_u
        grads = self._backward_batch(dcontrol, dutterance, cache)
        return LossBreakdown(utterance=loss_u, control=loss_c, weight=weight), grads


def init_model(config: ModelConfig, dtype=np.float32) -> RegressorModel:
    """Fresh model with seeded fan-in uniform weights and zeroed Adam state."""
    return RegressorModel.initialize(config, dtype=dtype)
