"""The iterative sample-then-train loop.

Each iteration: approximate the posterior of latent parameters with the
current network, sample latents for every observation, push them through the
(opaque, never-differentiated) forward operator to build paired data, refresh
the training set with a random drop of historical pairs, then train for a few
epochs.  Evaluation happens at the start of every iteration: infer,
synthesize, score sentence SNR on the train and validation splits.
"""

from __future__ import annotations

import hashlib
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .corpus import Clip, Corpus, synthesize_from_normalized
from .features import LOG_FLOOR, log_mel
from .metrics import sentence_snr
from .model import adam_step
from .trm import SynthesisError, UtteranceParams

logger = logging.getLogger(__name__)

__all__ = [
    "EmsslConfig",
    "PairedSample",
    "EngineAbort",
    "sample_posterior",
    "generate_pairs",
    "update_training_set",
    "train_iteration",
    "run_emssl",
    "adapt",
    "make_speech_forward_op",
]

_CLAMP = 1.0 - 1e-6


@dataclass(frozen=True)
class EmsslConfig:
    """Loop hyperparameters; defaults follow the training recipe."""

    samples_per_datapoint: int = 1      # L
    iteration_limit: int = 30           # T
    epochs_per_iteration: int = 10      # E
    batch_size: int = 32                # M
    drop_rate: float = 0.33             # gamma
    posterior_std: float = 0.0          # sigma, in normalized parameter space
    loss_weight: float = 0.001          # lambda on the control-rate loss
    learning_rate: float = 5e-4
    beta1: float = 0.5
    beta2: float = 0.999
    seed: int = 0

    def __post_init__(self):
        if self.samples_per_datapoint < 1:
            raise ValueError("samples_per_datapoint must be >= 1")
        if not (0.0 <= self.drop_rate < 1.0):
            raise ValueError("drop_rate must lie in [0, 1)")
        if self.posterior_std < 0:
            raise ValueError("posterior_std must be >= 0")
        if self.samples_per_datapoint > 1 and self.posterior_std == 0:
            raise ValueError("multi-sample mode needs posterior_std > 0")
        if self.iteration_limit < 0 or self.epochs_per_iteration < 0:
            raise ValueError("iteration_limit and epochs_per_iteration must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")

    def to_dict(self) -> dict:
        from dataclasses import asdict

        return asdict(self)


@dataclass
class PairedSample:
    """One sampled (latent, observation) pair with its provenance."""

    z: tuple                    # (global vector, per-frame matrix or None)
    x: np.ndarray               # observation, frame count of the source clip
    iteration: int
    source_id: str


class EngineAbort(RuntimeError):
    """A sub-operation signalled; carries the log rows gathered so far."""

    def __init__(self, message, log_rows):
        super().__init__(message)
        self.log_rows = log_rows


def _clip_seed(clip_id: str, *extra: int) -> np.random.SeedSequence:
    digest = hashlib.sha256(clip_id.encode()).digest()
    key = int.from_bytes(digest[:8], "little")
    return np.random.SeedSequence([key, *extra])


def _synthesis_seed(clip_id: str, iteration: int = 0, sample_index: int = 0) -> int:
    # noise identical for the deterministic sample and for evaluation, so
    # inverting a clip reproduces its logged SNR exactly
    if iteration == 0 and sample_index == 0:
        ss = _clip_seed(clip_id)
    else:
        ss = _clip_seed(clip_id, iteration, sample_index)
    return int(ss.generate_state(1)[0])


def sample_posterior(model, x, sigma: float, n_samples: int, seed: int):
    """Draw latents from a Gaussian centred on the network output.

    With sigma = 0 and one sample, the deterministic output is returned
    directly.  Samples are clamped inside the open (-1, 1) box.
    """
    if sigma < 0 or n_samples < 1:
        raise ValueError("need sigma >= 0 and n_samples >= 1")
    mean = model.infer(x)
    if sigma == 0.0:
        return [mean] * n_samples
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n_samples):
        parts = []
        for part in mean:
            if part is None:
                parts.append(None)
            else:
                noisy = part + sigma * rng.standard_normal(np.shape(part))
                parts.append(np.clip(noisy, -_CLAMP, _CLAMP))
        out.append(tuple(parts))
    return out


def generate_pairs(forward_op, z_list, metas, iteration: int = 0):
    """Apply the forward operator to sampled latents.

    `metas` carries (source clip id, frame count, noise seed) per latent.
    Output rows are trimmed/edge-padded to exactly the source frame count.
    Synthesis failures drop the sample with a warning instead of aborting.
    """
    pairs = []
    for z, (source_id, n_frames, seed) in zip(z_list, metas):
        try:
            x = np.asarray(forward_op(z, n_frames, seed), dtype=float)
        except SynthesisError as exc:
            logger.warning("dropping unstable sample for %s: %s", source_id, exc)
            continue
        if x.shape[0] > n_frames:
            x = x[:n_frames]
        elif x.shape[0] < n_frames:
            x = np.pad(x, ((0, n_frames - x.shape[0]), (0, 0)), mode="edge")
        pairs.append(PairedSample(z=z, x=x, iteration=iteration, source_id=source_id))
    return pairs


def update_training_set(phi, phi_t, drop_rate: float, seed: int):
    """Drop exactly round(drop_rate * |phi|) samples uniformly, then merge."""
    if not (0.0 <= drop_rate < 1.0):
        raise ValueError("drop_rate must lie in [0, 1)")
    phi = list(phi)
    n_drop = int(round(drop_rate * len(phi)))
    if n_drop:
        rng = np.random.default_rng(seed)
        dropped = set(rng.choice(len(phi), size=n_drop, replace=False).tolist())
        phi = [s for i, s in enumerate(phi) if i not in dropped]
    return phi + list(phi_t)


def train_iteration(model, phi, cfg: EmsslConfig, iteration: int = 0):
    """E epochs of shuffled minibatch Adam on the current training set."""
    if len(phi) < 1:
        raise ValueError("training set is empty")
    epoch_losses = []
    m = cfg.batch_size
    for epoch in range(cfg.epochs_per_iteration):
        rng = np.random.default_rng(
            np.random.SeedSequence([cfg.seed, 0x5AFE, iteration, epoch])
        )
        order = rng.permutation(len(phi))
        totals = []
        for start in range(0, len(phi), m):
            batch_samples = [phi[i] for i in order[start : start + m]]
            batch = model.make_batch([(s.x, s.z) for s in batch_samples])
            breakdown, grads = model.loss_and_grad(batch, cfg.loss_weight)
            adam_step(model, grads, cfg.learning_rate, cfg.beta1, cfg.beta2)
            totals.append(breakdown.total)
        epoch_losses.append(float(np.mean(totals)))
    return model, epoch_losses


def _infer_and_score(model, clip: Clip, forward_op):
    z = model.infer(clip.mel)
    seed = _synthesis_seed(clip.clip_id)
    x_hat = np.asarray(forward_op(z, clip.n_frames, seed), dtype=float)
    if x_hat.shape[0] > clip.n_frames:
        x_hat = x_hat[: clip.n_frames]
    elif x_hat.shape[0] < clip.n_frames:
        x_hat = np.pad(x_hat, ((0, clip.n_frames - x_hat.shape[0]), (0, 0)), mode="edge")
    return z, x_hat, sentence_snr(clip.observation, x_hat)


def _map_clips(fn, clips, workers: int):
    if workers <= 1:
        return [fn(c) for c in clips]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, clips))


def run_emssl(dataset: Corpus, forward_op, model, cfg: EmsslConfig,
              callbacks=None, workers: int = 1):
    """Alternate sampling and training for cfg.iteration_limit iterations.

    Returns (model, log rows).  Each iteration contributes one row per
    non-empty split: dict(iteration, split, mean_snr, std_snr, mean_loss).
    The sampling/evaluation step is data-parallel across clips when
    workers > 1; training is serialized on the model.
    """
    train_clips = dataset.subset("train") or list(dataset.clips)
    val_clips = dataset.subset("val")
    if not train_clips:
        raise ValueError("dataset has no clips to train on")
    log_rows: list[dict] = []
    phi: list[PairedSample] = []
    deterministic = cfg.posterior_std == 0.0 and cfg.samples_per_datapoint == 1

    try:
        for t in range(1, cfg.iteration_limit + 1):
            # --- sampling + evaluation with the iteration-start network ----
            def sample_one(clip, _t=t):
                z_det, x_hat_det, snr = _infer_and_score(model, clip, forward_op)
                if deterministic:
                    # the deterministic sample IS the evaluation synthesis;
                    # reuse it instead of synthesizing twice
                    pairs = [
                        PairedSample(z=z_det, x=x_hat_det, iteration=_t,
                                     source_id=clip.clip_id)
                    ]
                    return snr, pairs
                seed = int(_clip_seed(clip.clip_id, 0xD4A, _t).generate_state(1)[0])
                zs = sample_posterior(
                    model, clip.mel, cfg.posterior_std,
                    cfg.samples_per_datapoint, seed,
                )
                metas = [
                    (clip.clip_id, clip.n_frames, _synthesis_seed(clip.clip_id, _t, l))
                    for l in range(len(zs))
                ]
                return snr, generate_pairs(forward_op, zs, metas, iteration=_t)

            results = _map_clips(sample_one, train_clips, workers)
            train_snrs = np.array([snr for snr, _ in results])
            phi_t = [p for _, pairs in results for p in pairs]

            val_snrs = np.array(
                [s for _, _, s in _map_clips(
                    lambda c: _infer_and_score(model, c, forward_op), val_clips, workers
                )]
            ) if val_clips else None

            # --- training set refresh (Algorithm 2) ------------------------
            drop_seed = int(
                np.random.SeedSequence([cfg.seed, 0xD20B, t]).generate_state(1)[0]
            )
            phi = update_training_set(phi, phi_t, cfg.drop_rate, drop_seed)

            # --- training ---------------------------------------------------
            model, epoch_losses = train_iteration(model, phi, cfg, iteration=t)
            mean_loss = float(np.mean(epoch_losses)) if epoch_losses else None

            log_rows.append(
                {
                    "iteration": t,
                    "split": "train",
                    "mean_snr": float(train_snrs.mean()),
                    "std_snr": float(train_snrs.std()),
                    "mean_loss": mean_loss,
                }
            )
            if val_snrs is not None:
                log_rows.append(
                    {
                        "iteration": t,
                        "split": "val",
                        "mean_snr": float(val_snrs.mean()),
                        "std_snr": float(val_snrs.std()),
                        "mean_loss": None,
                    }
                )
            if callbacks and "on_iteration" in callbacks:
                callbacks["on_iteration"](t, model, log_rows)
    except (SynthesisError, ValueError, RuntimeError) as exc:
        if isinstance(exc, EngineAbort):
            raise
        raise EngineAbort(str(exc), log_rows) from exc
    return model, log_rows


def adapt(trained_model, new_clips: Corpus, cfg: EmsslConfig,
          forward_op=None, callbacks=None, workers: int = 1):
    """Continue the loop from trained weights on new clips, fresh training set.

    `new_clips` uses split "train" for the adaptation clips and optionally
    "val" for held-out monitoring.
    """
    if len(new_clips.clips) == 0:
        raise ValueError("adaptation needs at least one clip")
    if forward_op is None:
        forward_op = make_speech_forward_op(new_clips.utterance_template)
    return run_emssl(new_clips, forward_op, trained_model, cfg,
                     callbacks=callbacks, workers=workers)


def make_speech_forward_op(template: UtteranceParams | None = None):
    """The articulatory forward operator F: normalized latent -> log-mel.

    Exposes evaluation only; no derivative interface exists, so gradients
    can never flow through it.
    """
    template = template if template is not None else UtteranceParams()

    def forward_op(z, n_frames: int, seed: int) -> np.ndarray:
        utt, ctrl = z
        if ctrl is None:
            raise ValueError("speech forward operator needs per-frame controls")
        w = synthesize_from_normalized(
            np.asarray(utt, dtype=float), np.asarray(ctrl, dtype=float),
            template, seed,
        )
        return log_mel(w).values

    return forward_op
