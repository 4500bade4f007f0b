"""Mini-batch Adam training against the loss ensemble, with per-epoch validation."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyDataset, InvalidSpec, ShapeMismatch
from .losses import LossWeights, all_losses, loss_ensemble
from .metrics import snr_per_sample
from .network import UNetConfig, backward, check_params, forward, is_trainable

log = logging.getLogger(__name__)

HISTORY_FIELDS = ("epoch", "train_loss", "val_amp", "val_vel", "val_acc", "val_freq",
                  "val_ens", "val_snr")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 150
    batch_size: int = 128
    learning_rate: float = 0.01
    weights: LossWeights = LossWeights()
    seed: int = 0
    optimizer: str = "adam"
    shuffle: bool = True
    select_by: str = "loss"
    dtype: str = "float32"

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1 or not self.learning_rate > 0:
            raise InvalidSpec("need epochs >= 0, batch_size >= 1, learning_rate > 0")
        if self.optimizer != "adam":
            raise InvalidSpec(f"unsupported optimizer {self.optimizer!r}")
        if self.select_by not in ("loss", "snr"):
            raise InvalidSpec("select_by must be 'loss' or 'snr'")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_amp: float
    val_vel: float
    val_acc: float
    val_freq: float
    val_ens: float
    val_snr: float
    seconds: float = 0.0

    def row(self) -> list:
        return [getattr(self, f) for f in HISTORY_FIELDS]


@dataclass
class TrainingReport:
    history: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.history])

    @property
    def best(self) -> EpochRecord | None:
        return self.history[self.best_epoch - 1] if self.best_epoch else None


# -- optimizer -----------------------------------------------------------------

@dataclass
class AdamState:
    m: dict
    v: dict
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, params: dict) -> "AdamState":
        m = {k: np.zeros_like(p) for k, p in params.items() if is_trainable(k)}
        return cls(m, {k: np.zeros_like(p) for k, p in m.items()})


def apply_update(params: dict, grads: dict, state: AdamState, lr: float) -> None:
    """One Adam step, in place on ``params`` and ``state``."""
    if set(grads) != set(state.m):
        raise ShapeMismatch("gradient names do not match optimizer state")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1 - b1 ** state.step
    c2 = 1 - b2 ** state.step
    for name, g in grads.items():
        p = params[name]
        if g.shape != p.shape:
            raise ShapeMismatch(f"{name}: gradient {g.shape} vs parameter {p.shape}")
        m, v = state.m[name], state.v[name]
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g * g
        p -= (lr * (m / c1) / (np.sqrt(v / c2) + state.eps)).astype(p.dtype)


# -- validation ----------------------------------------------------------------

def validate(params: dict, config: UNetConfig, pairs, weights: LossWeights = LossWeights(),
             batch_size: int = 256) -> dict[str, float]:
    """Mean of every loss term, the ensemble and SNR over ``pairs`` (inference mode)."""
    n = len(pairs)
    if n == 0:
        raise EmptyDataset("validation set is empty")
    sums = dict.fromkeys(("amp", "vel", "acc", "freq", "ens", "snr"), 0.0)
    dtype = params["head.weight"].dtype
    for start in range(0, n, batch_size):
        xin = pairs.noisy[start:start + batch_size].astype(dtype, copy=False)
        x = pairs.clean[start:start + batch_size].astype(np.float64)
        y = forward(params, config, xin)[0].astype(np.float64)
        b = len(x)
        terms = all_losses(y, x, pairs.fs)
        for k, val in terms.items():
            sums[k] += val * b
        sums["ens"] += _combine(terms, weights) * b
        sums["snr"] += float(snr_per_sample(y, x).sum())
    return {k: v / n for k, v in sums.items()}


def _combine(terms: dict, weights: LossWeights) -> float:
    total = weights.total
    value = 0.0
    for alpha, key in zip(weights.as_tuple(), ("amp", "vel", "acc", "freq")):
        if alpha:
            value += alpha / total * terms[key]
    return value


# -- training loop ---------------------------------------------------------------

def _batches(n, batch_size, rng, shuffle):
    order = rng.permutation(n) if shuffle else np.arange(n)
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]


def train(params: dict, config: UNetConfig, train_pairs, val_pairs, tc: TrainConfig,
          on_epoch=None) -> tuple[dict, TrainingReport]:
    """Train a copy of ``params``; return the best-epoch parameters and the report.

    ``on_epoch(record, params, is_best)`` is called after each validation.
    """
    check_params(params, config)
    if len(train_pairs) == 0 or len(val_pairs) == 0:
        raise EmptyDataset("training and validation sets must be nonempty")
    for pairs in (train_pairs, val_pairs):
        if pairs.channels != config.in_channels:
            raise ShapeMismatch(
                f"data has {pairs.channels} channels, model expects {config.in_channels}")
    dtype = np.dtype(tc.dtype)
    params = {k: v.astype(dtype, copy=True) for k, v in params.items()}
    best = {k: v.copy() for k, v in params.items()}
    state = AdamState.zeros_like(params)
    report = TrainingReport()
    best_score = np.inf
    fs = train_pairs.fs
    for epoch in range(1, tc.epochs + 1):
        started = time.perf_counter()
        rng = np.random.default_rng([tc.seed, epoch])
        loss_sum = 0.0
        for idx in _batches(len(train_pairs), tc.batch_size, rng, tc.shuffle):
            xin = train_pairs.noisy[idx].astype(dtype, copy=False)
            x = train_pairs.clean[idx].astype(dtype, copy=False)
            y, cache = forward(params, config, xin, mode="train")
            value, dy = loss_ensemble(y, x, tc.weights, fs, return_grad=True)
            grads = backward(params, config, cache, dy)
            apply_update(params, grads, state, tc.learning_rate)
            params.update(cache.running)
            loss_sum += value * len(idx)
        metrics = validate(params, config, val_pairs, tc.weights)
        record = EpochRecord(
            epoch, loss_sum / len(train_pairs), metrics["amp"], metrics["vel"], metrics["acc"],
            metrics["freq"], metrics["ens"], metrics["snr"], time.perf_counter() - started)
        report.history.append(record)
        score = -record.val_snr if tc.select_by == "snr" else record.val_ens
        is_best = score < best_score
        if is_best:
            best_score = score
            report.best_epoch = epoch
            best = {k: v.copy() for k, v in params.items()}
        log.info("epoch %d train %.4f val_ens %.4f snr %.2f dB (%.1fs)", epoch,
                 record.train_loss, record.val_ens, record.val_snr, record.seconds)
        if on_epoch is not None:
            on_epoch(record, params, is_best)
    return best, report
