"""Loss computation, Adam optimization, and the per-window training loop.

The window objective sums the decay-weighted sparsity-aware
reconstruction error over every step of the window and adds the L2
parameter penalty once; one optimizer update runs per window.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import NumericError, ParamStore, Tape
from .graphdata import WeightedSnapshot, sliding_windows, split
from .model import ModelDims, forward_window, init_params, prepare_sequence


class TrainingAbort(Exception):
    """Non-finite loss; carries the epoch and window where it happened."""


@dataclass
class LossConfig:
    epsilon: float = 10.0   # weight of existing-link terms in the squared error
    beta: float = 0.001     # L1 sparsity pressure on predictions
    eta: float = 0.5        # per-step decay base, recent steps weigh more
    lam: float = 0.0005     # L2 parameter penalty

    def validate(self) -> None:
        if self.epsilon <= 1:
            raise ValueError("epsilon must be > 1")
        if not 0 < self.eta < 1:
            raise ValueError("eta must be in (0, 1)")
        if self.beta < 0 or self.lam < 0:
            raise ValueError("beta and lambda must be >= 0")


@dataclass
class TrainConfig:
    epochs: int = 200
    window: int = 11
    n_train: int = 50
    seed: int = 1
    learning_rate: float = 0.0005
    loss: LossConfig = field(default_factory=LossConfig)
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    early_stop_patience: int = 20
    early_stop_min_delta: float = 1e-6

    def validate(self) -> None:
        if self.window < 2:
            raise ValueError("window must be >= 2")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.n_train < 1:
            raise ValueError("n_train must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        self.loss.validate()


def weighted_rec_loss(target: np.ndarray, prediction, epsilon: float):
    """Squared error with existing-link entries amplified by epsilon."""
    if target.shape != prediction.value.shape:
        raise ad.ShapeError(
            f"target shape {target.shape} != prediction shape {prediction.value.shape}")
    amplify = np.where(target == 1.0, epsilon, 1.0)
    return ad.sum_all(ad.mul(amplify, ad.square(ad.sub(target, prediction))))


def sparse_rec_loss(target: np.ndarray, prediction, epsilon: float, beta: float):
    """Weighted reconstruction error plus an L1 push toward sparsity."""
    rec = weighted_rec_loss(target, prediction, epsilon)
    return ad.add(rec, ad.mul(beta, ad.sum_all(ad.abs_(prediction))))


def l2_reg(binding: dict):
    """Sum of squared Frobenius norms over every bound parameter."""
    total = None
    for leaf in binding.values():
        term = ad.sum_all(ad.square(leaf))
        total = term if total is None else ad.add(total, term)
    return total


def decay_weight(t: int, window: int, eta: float) -> float:
    """eta^(window - t) for step t in [2, window]; the last step gets 1."""
    if not 2 <= t <= window:
        raise ValueError(f"t must be in [2, {window}], got {t}")
    return eta ** (window - t)


def total_window_loss(predictions: list, targets: list, binding: dict,
                      cfg: LossConfig):
    """Decay-weighted per-step losses plus the L2 penalty added once."""
    if len(predictions) != len(targets):
        raise ad.ShapeError(
            f"{len(predictions)} predictions vs {len(targets)} targets")
    window = len(predictions) + 1
    total = None
    for k, (pred, target) in enumerate(zip(predictions, targets)):
        weight = decay_weight(k + 2, window, cfg.eta)
        term = ad.mul(weight, sparse_rec_loss(target, pred, cfg.epsilon, cfg.beta))
        total = term if total is None else ad.add(total, term)
    return ad.add(total, ad.mul(cfg.lam, l2_reg(binding)))


class Adam:
    """Bias-corrected Adam over a ParamStore's gradient buffers."""

    def __init__(self, store: ParamStore, lr: float = 0.0005, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.step_count = 0
        self.m = {name: np.zeros_like(v) for name, v in store.items()}
        self.v = {name: np.zeros_like(v) for name, v in store.items()}

    def step(self, store: ParamStore) -> None:
        self.step_count += 1
        bc1 = 1.0 - self.beta1 ** self.step_count
        bc2 = 1.0 - self.beta2 ** self.step_count
        for name, value in store.items():
            g = store.grads[name]
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            value -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


@dataclass
class TrainResult:
    store: ParamStore
    dims: ModelDims
    history: list           # (epoch, window_index, loss) triples
    epochs_run: int
    prepared: list
    split: object


def window_targets(prepared: list, sample) -> list[np.ndarray]:
    """Binarized snapshots for positions 2..l of the window."""
    first = sample.start + 1
    return [prepared[i].target for i in range(first, first + len(sample.history))]


def train(snapshots: list[WeightedSnapshot], cfg: TrainConfig,
          dims: ModelDims | None = None, log=None) -> TrainResult:
    """Windowed training over the chronological train split.

    Per window: forward over the l-1 history snapshots, one backward
    pass, one Adam update. Stops early when the epoch-mean loss has not
    improved by early_stop_min_delta for early_stop_patience epochs.
    """
    cfg.validate()
    if dims is None:
        dims = ModelDims(nodes=snapshots[0].n)
    samples = sliding_windows(snapshots, cfg.window)
    dataset = split(samples, cfg.n_train)
    prepared = prepare_sequence(snapshots, cfg.seed)
    store = init_params(dims, cfg.seed)
    adam = Adam(store, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)

    history = []
    best = np.inf
    stale = 0
    epochs_run = 0
    for epoch in range(cfg.epochs):
        epoch_total = 0.0
        for w_idx, sample in enumerate(dataset.train):
            tape = Tape()
            binding = store.bind(tape)
            try:
                predictions = forward_window(
                    binding, prepared[sample.start:sample.start + cfg.window - 1], dims)
                loss = total_window_loss(predictions, window_targets(prepared, sample),
                                         binding, cfg.loss)
                value = float(loss.value)
                ad.backward(loss)
            except NumericError as exc:
                raise TrainingAbort(
                    f"non-finite loss at epoch {epoch}, window {w_idx}: {exc}") from exc
            store.harvest(binding)
            adam.step(store)
            history.append((epoch, w_idx, value))
            epoch_total += value
        epochs_run = epoch + 1

        epoch_mean = epoch_total / len(dataset.train)
        if log is not None:
            log(epoch, epoch_mean)
        if epoch_mean < best - cfg.early_stop_min_delta:
            best = epoch_mean
            stale = 0
        else:
            stale += 1
            if stale >= cfg.early_stop_patience:
                break

    return TrainResult(store, dims, history, epochs_run, prepared, dataset)
