"""Minibatch Adam training with teacher forcing and early stopping."""

from __future__ import annotations

import copy
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

log = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 3e-5
    batch_size: int = 32
    patience: int = 3
    max_epochs: int = 50
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.max_epochs < 0:
            raise ValueError("max_epochs must be >= 0")

    def to_dict(self) -> dict:
        return asdict(self)


class Adam:
    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8, frozen=()):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.frozen = set(frozen)
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for k, g in grads.items():
            if k in self.frozen:
                continue
            m, v = self.m[k], self.v[k]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            params[k] -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def batch_loss(model, params, batch, rng=None, need_grad=True):
    """Token-averaged NLL over ``batch`` of ``(source, token_ids)`` pairs.

    Returns ``(mean_loss, grads)``; ``grads`` is None when ``need_grad`` is False.
    """
    counts = [int(np.count_nonzero(np.asarray(t[1:]) != 0)) for _, t in batch]
    total = max(sum(counts), 1)
    grads = {k: np.zeros_like(v) for k, v in params.items()} if need_grad else None
    loss = 0.0
    for source, tokens in batch:
        s, _ = model.sequence_loss(
            params, source, tokens, rng=rng, need_grad=need_grad, grads=grads, scale=1.0 / total
        )
        loss += s
    return loss / total, grads


def dataset_loss(model, params, data, batch_size=32):
    if not data:
        return float("nan")
    return batch_loss(model, params, data, need_grad=False)[0]


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    valid_loss: float


@dataclass
class TrainResult:
    params: dict
    history: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    stopped_early: bool = False


def train(model, data, tcfg: TrainConfig, valid=None, frozen=()):
    """Fit ``model.params`` in place and return the best-validation snapshot.

    ``data`` and ``valid`` are lists of ``(source, token_ids)``; with no
    validation set the training data is scored in eval mode instead.
    Epoch 0 in the history is the untrained model.
    """
    if not data:
        raise ValueError("training set is empty")
    max_len = model.decoder_cfg.max_len
    for i, (_, toks) in enumerate(data):
        if len(toks) - 1 > max_len:
            raise ValueError(f"sample {i}: caption of {len(toks)} ids exceeds max_len {max_len}")
    valid = data if valid is None else valid
    rng = np.random.default_rng(tcfg.seed)
    params = model.params
    opt = Adam(params, tcfg.learning_rate, tcfg.beta1, tcfg.beta2, tcfg.adam_eps, frozen=frozen)

    best_loss = dataset_loss(model, params, valid)
    best = copy.deepcopy(params)
    result = TrainResult(best, [EpochRecord(0, best_loss, best_loss)], 0)
    stale = 0
    step = 0
    for epoch in range(1, tcfg.max_epochs + 1):
        order = rng.permutation(len(data))
        total, n_batches = 0.0, 0
        for b, start in enumerate(range(0, len(data), tcfg.batch_size)):
            batch = [data[i] for i in order[start : start + tcfg.batch_size]]
            loss, grads = batch_loss(model, params, batch, rng=rng)
            if not math.isfinite(loss):
                raise TrainingError(f"non-finite loss {loss} at step {step} (epoch {epoch}, batch {b})")
            opt.step(params, grads)
            total += loss
            n_batches += 1
            step += 1
        vloss = dataset_loss(model, params, valid)
        result.history.append(EpochRecord(epoch, total / n_batches, vloss))
        log.info("epoch %d train %.5f valid %.5f", epoch, total / n_batches, vloss)
        if vloss < best_loss:
            best_loss, stale = vloss, 0
            result.params = copy.deepcopy(params)
            result.best_epoch = epoch
        else:
            stale += 1
            if stale >= tcfg.patience:
                result.stopped_early = True
                break
    model.params.update(result.params)
    return result
