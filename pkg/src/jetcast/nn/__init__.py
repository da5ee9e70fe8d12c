"""Minimal float64 layer engine: forward/backward, losses, SGD with momentum, gradient checks."""

from .gradcheck import GradCheckResult, grad_check
from .layers import Conv2D, Dense, Flatten, Layer, MaxPool, ReLU, Sigmoid, Tanh
from .losses import (
    MseObjective,
    SparseAeLossConfig,
    SparseAeObjective,
    kl_divergence,
    mse_loss,
    sparse_ae_loss,
)
from .network import Network, backward, extract_features, forward
from .optim import SgdMomentumConfig, sgd_momentum_step, train

__all__ = [
    "Conv2D", "Dense", "Flatten", "Layer", "MaxPool", "ReLU", "Sigmoid", "Tanh",
    "Network", "forward", "backward", "extract_features",
    "mse_loss", "sparse_ae_loss", "kl_divergence", "SparseAeLossConfig",
    "MseObjective", "SparseAeObjective",
    "SgdMomentumConfig", "sgd_momentum_step", "train",
    "GradCheckResult", "grad_check",
]
