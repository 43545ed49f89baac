"""Momentum SGD with L2 weight decay and best-validation checkpointing."""
from __future__ import annotations

import logging
from dataclasses import dataclass, asdict
from typing import Optional

import numpy as np

from . import network as net

log = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    def __init__(self, iteration: int, value: float):
        super().__init__(f"non-finite loss {value!r} at iteration {iteration}")
        self.iteration = iteration
        self.value = value


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.02
    momentum: float = 0.88
    l2: float = 9.4e-7
    batch_size: int = 8
    max_iterations: int = 1000
    eval_every: int = 50
    seed: int = 0
    attempts: int = 30
    precision: str = "float32"

    def __post_init__(self):
        if self.learning_rate < 0 or not 0 <= self.momentum < 1 or self.l2 < 0:
            raise ValueError("learning_rate, l2 must be >= 0 and momentum in [0, 1)")
        if self.batch_size < 1 or self.max_iterations < 0 or self.eval_every < 1:
            raise ValueError("batch_size, eval_every must be >= 1 and max_iterations >= 0")
        if self.attempts < 1:
            raise ValueError("attempts must be >= 1")
        if self.precision not in ("float32", "float64"):
            raise ValueError("precision must be float32 or float64")

    @property
    def dtype(self):
        return np.dtype(self.precision)

    def as_dict(self) -> dict:
        return asdict(self)


def _batches(n: int, size: int, rng: np.random.Generator):
    """Endless stream of index batches; reshuffled each epoch, remainder dropped."""
    size = min(size, n)
    while True:
        order = rng.permutation(n)
        for start in range(0, n - size + 1, size):
            yield order[start:start + size]


def accuracy(model: net.TrainedModel, x, y) -> float:
    return float(np.mean(net.predict(model, x) == np.asarray(y)))


def train(model: net.TrainedModel, x_train, y_train, config: TrainConfig,
          x_val=None, y_val=None) -> net.TrainedModel:
    """Run ``max_iterations`` mini-batch updates; keep the best-validation parameters.

    With validation data, accuracy is measured every ``eval_every`` updates and
    the first parameter set reaching the highest accuracy is returned.  Without
    it, the final parameters are returned.  The input model is not modified.
    """
    x_train = net.as_batch(model, x_train)
    y_train = np.asarray(y_train, dtype=np.int64)
    if x_train.shape[0] == 0:
        raise ValueError("empty training set")
    has_val = x_val is not None and len(x_val) > 0
    if has_val:
        x_val = net.as_batch(model, x_val)
        y_val = np.asarray(y_val, dtype=np.int64)

    work = net.TrainedModel(model.spec, model.image_shape, model.copy_params(), [], config)
    velocity = {k: np.zeros_like(v) for k, v in work.params.items()}
    rng = np.random.default_rng([config.seed, 0x5EED])
    stream = _batches(x_train.shape[0], config.batch_size, rng)
    lr, mom, l2 = config.learning_rate, config.momentum, config.l2
    best_acc, best_params = -1.0, work.copy_params()
    running = []

    for it in range(1, config.max_iterations + 1):
        idx = next(stream)
        # overflow surfaces as a non-finite loss, reported below
        with np.errstate(over="ignore", invalid="ignore"):
            grads, value = net.backward(work, x_train[idx], y_train[idx], l2)
        if not np.isfinite(value):
            raise TrainingDiverged(it, value)
        running.append(value)
        for k, p in work.params.items():
            v = velocity[k]
            v *= mom
            v -= lr * grads[k]
            p += v
        if it % config.eval_every == 0 or it == config.max_iterations:
            val_acc = accuracy(work, x_val, y_val) if has_val else float("nan")
            work.trace.append((it, float(np.mean(running)), val_acc))
            running = []
            if has_val and val_acc > best_acc:
                best_acc, best_params = val_acc, work.copy_params()
            log.debug("iteration %d loss %.5f val %.4f", it, work.trace[-1][1], val_acc)

    if has_val and best_acc >= 0:
        work.params = best_params
    return work


def format_trace(model: net.TrainedModel) -> str:
    lines = ["iteration validation_accuracy"]
    lines += ["%d %.6f" % (it, acc) for it, _, acc in model.trace]
    return "\n".join(lines) + "\n"
