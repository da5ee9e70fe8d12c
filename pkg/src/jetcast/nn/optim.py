from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..errors import ShapeMismatch
from .losses import MseObjective


@dataclass(frozen=True)
class SgdMomentumConfig:
    learning_rate: float = 0.001
    momentum: float = 0.9
    epochs: int = 1
    batch_size: int = 32

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")


def sgd_momentum_step(params, grads, velocity, cfg: SgdMomentumConfig):
    """In-place velocity-form update: ``v = mu*v - lr*g; p = p + v``.

    Returns ``(params, velocity)`` for convenience; both lists are mutated.
    """
    if not len(params) == len(grads) == len(velocity):
        raise ShapeMismatch("params, grads and velocity differ in length")
    lr, mu = cfg.learning_rate, cfg.momentum
    for p, g, v in zip(params, grads, velocity):
        if not p.shape == g.shape == v.shape:
            raise ShapeMismatch(f"shapes {p.shape}, {g.shape}, {v.shape} do not align")
        if mu:
            v *= mu
            v -= lr * g
        else:
            v[...] = -lr * g
        p += v
    return params, velocity


def train(
    net,
    X: np.ndarray,
    y: np.ndarray | None,
    cfg: SgdMomentumConfig,
    seed: int,
    objective=None,
    on_epoch: Callable[[int, float], None] | None = None,
) -> list[float]:
    """Mini-batch SGD with momentum over shuffled epochs.

    The shuffle order comes from ``seed`` alone, so identical inputs give
    bit-identical parameters.  Returns the mean batch loss of each epoch.
    """
    objective = objective or MseObjective()
    rng = np.random.default_rng([int(seed), 0x5EED])
    n = len(X)
    params = net.params
    velocity = [np.zeros_like(p) for p in params]
    bs = min(cfg.batch_size, n)
    history = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(n) if bs < n else np.arange(n)
        total = 0.0
        steps = 0
        for start in range(0, n, bs):
            idx = order[start:start + bs]
            yb = None if y is None else y[idx]
            loss, grads = objective.value_and_grad(net, X[idx], yb)
            sgd_momentum_step(params, grads, velocity, cfg)
            total += loss
            steps += 1
        history.append(total / steps)
        if on_epoch is not None:
            on_epoch(epoch, history[-1])
    return history
