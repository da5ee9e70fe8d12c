"""Losses and the objectives that pair them with a network."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ShapeMismatch

RHO_HAT_CLAMP = 1e-8


def mse_loss(pred, target) -> tuple[float, np.ndarray]:
    """Mean of squared errors over all elements, and its gradient w.r.t. ``pred``."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ShapeMismatch(f"prediction {pred.shape} vs target {target.shape}")
    diff = pred - target
    return float(np.mean(diff * diff)), (2.0 / diff.size) * diff


def kl_divergence(rho, rho_hat):
    """Bernoulli KL(rho || rho_hat), elementwise."""
    rho = np.asarray(rho, dtype=np.float64)
    rho_hat = np.asarray(rho_hat, dtype=np.float64)
    return rho * np.log(rho / rho_hat) + (1.0 - rho) * np.log((1.0 - rho) / (1.0 - rho_hat))


@dataclass(frozen=True)
class SparseAeLossConfig:
    l2_weight: float = 0.0
    sparsity_reg: float = 0.0
    sparsity_prop: float = 0.1

    def __post_init__(self):
        if self.l2_weight < 0 or self.sparsity_reg < 0:
            raise ValueError("l2_weight and sparsity_reg must be >= 0")
        if not 0.0 < self.sparsity_prop < 1.0:
            raise ValueError("sparsity_prop must lie in (0, 1)")


@dataclass
class SparseAeLoss:
    value: float
    mse: float
    l2: float
    sparsity: float
    d_recon: np.ndarray
    d_hidden: np.ndarray
    d_weights: list[np.ndarray]


def sparse_ae_loss(recon, inputs, hidden, weights, cfg: SparseAeLossConfig) -> SparseAeLoss:
    """MSE(recon, inputs) + l2 * sum(w**2) + beta * sum_j KL(rho || rho_hat_j).

    ``rho_hat_j`` is the batch mean of hidden unit ``j``, clamped to
    ``[1e-8, 1 - 1e-8]`` (clamped units contribute no gradient).
    """
    mse, d_recon = mse_loss(recon, inputs)
    hidden = np.asarray(hidden, dtype=np.float64)
    m = len(hidden)

    l2 = sum(float(np.sum(w * w)) for w in weights)
    d_weights = [2.0 * cfg.l2_weight * w for w in weights]

    raw = hidden.mean(axis=0)
    rho_hat = np.clip(raw, RHO_HAT_CLAMP, 1.0 - RHO_HAT_CLAMP)
    rho = cfg.sparsity_prop
    kl = float(np.sum(kl_divergence(rho, rho_hat)))
    d_rho_hat = cfg.sparsity_reg * (-rho / rho_hat + (1.0 - rho) / (1.0 - rho_hat))
    d_rho_hat = np.where(rho_hat == raw, d_rho_hat, 0.0)
    d_hidden = np.broadcast_to(d_rho_hat / m, hidden.shape)

    value = mse + cfg.l2_weight * l2 + cfg.sparsity_reg * kl
    return SparseAeLoss(value, mse, l2, kl, d_recon, d_hidden, d_weights)


class MseObjective:
    """Plain regression objective: ``mse_loss(net(x), y)``."""

    def value(self, net, x, y) -> float:
        return mse_loss(net.forward(x)[-1], y)[0]

    def value_and_grad(self, net, x, y):
        acts = net.forward(x)
        loss, d_out = mse_loss(acts[-1], y)
        grads, _ = net.backward(acts, d_out)
        return loss, grads


class SparseAeObjective:
    """Sparse reconstruction objective for a ``Dense, Sigmoid, Dense, act`` autoencoder.

    The target is the input itself (``y`` is ignored).  Weight decay applies
    to the Dense weight matrices only, never to biases.
    """

    def __init__(self, cfg: SparseAeLossConfig, hidden_index: int = 2):
        self.cfg = cfg
        self.hidden_index = hidden_index

    def _loss(self, net, acts):
        return sparse_ae_loss(acts[-1], acts[0], acts[self.hidden_index], net.dense_weights(), self.cfg)

    def value(self, net, x, y=None) -> float:
        return self._loss(net, net.forward(x)).value

    def value_and_grad(self, net, x, y=None):
        acts = net.forward(x)
        res = self._loss(net, acts)
        grads, _ = net.backward(acts, res.d_recon, extra={self.hidden_index: res.d_hidden})
        # weight-decay gradient goes onto the matching Dense.W entries
        ids = {id(w): k for k, w in enumerate(net.dense_weights())}
        for i, p in enumerate(net.params):
            k = ids.get(id(p))
            if k is not None:
                grads[i] = grads[i] + res.d_weights[k]
        return res.value, grads
