"""Central-difference verification of analytic gradients."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .layers import Conv2D, Dense, Flatten, MaxPool, ReLU, Sigmoid, Tanh
from .losses import MseObjective, SparseAeLossConfig, SparseAeObjective
from .network import Network

DEFAULT_EPSILON = 1e-5
TOLERANCE = 1e-4


@dataclass
class GradCheckResult:
    max_rel_error: float
    n_params: int
    per_param: list[float] = field(default_factory=list)

    def passed(self, tol: float = TOLERANCE) -> bool:
        return self.max_rel_error < tol


def relative_error(analytic, numeric):
    a = np.abs(analytic)
    n = np.abs(numeric)
    return np.abs(analytic - numeric) / np.maximum(np.maximum(a, n), 1e-12)


def numeric_gradient(net: Network, batch, objective, targets=None, epsilon=DEFAULT_EPSILON):
    grads = []
    for p in net.params:
        g = np.zeros_like(p)
        flat, gflat = p.reshape(-1), g.reshape(-1)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + epsilon
            up = objective.value(net, batch, targets)
            flat[k] = orig - epsilon
            down = objective.value(net, batch, targets)
            flat[k] = orig
            gflat[k] = (up - down) / (2.0 * epsilon)
        grads.append(g)
    return grads


def grad_check(net: Network, batch, objective=None, targets=None, epsilon=DEFAULT_EPSILON, grad_fn=None):
    """Compare analytic and central-difference gradients of every parameter.

    ``grad_fn(net, batch, targets) -> grads`` overrides the analytic route,
    which lets tests inject a faulty gradient.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")
    objective = objective or MseObjective()
    if grad_fn is None:
        _, analytic = objective.value_and_grad(net, batch, targets)
    else:
        analytic = grad_fn(net, batch, targets)
    numeric = numeric_gradient(net, batch, objective, targets, epsilon)
    per = [float(relative_error(a, n).max()) if a.size else 0.0 for a, n in zip(analytic, numeric)]
    return GradCheckResult(max(per, default=0.0), net.n_params, per)


def kink_margin(net: Network, batch) -> float:
    """Smallest distance of any ReLU input from 0 or any max-pool winner from its runner-up."""
    acts = net.forward(batch)
    margin = np.inf
    for i, layer in enumerate(net.layers):
        x = acts[i]
        if isinstance(layer, ReLU):
            margin = min(margin, float(np.abs(x).min()))
        elif isinstance(layer, MaxPool):
            win = np.sort(layer._windows(x), axis=-1)
            margin = min(margin, float((win[..., -1] - win[..., -2]).min()))
    return margin


@dataclass
class GradCheckCase:
    name: str
    net: Network
    batch: np.ndarray
    targets: np.ndarray | None
    objective: object


def _kink_free_batch(rng, net, shape, min_margin=1e-3, tries=200):
    for _ in range(tries):
        batch = rng.normal(size=shape)
        if kink_margin(net, batch) > min_margin:
            return batch
    raise RuntimeError("could not draw a kink-free batch")


def default_cases(seed: int = 0) -> list[GradCheckCase]:
    """Small networks covering every layer type and both losses."""
    rng = np.random.default_rng(seed)
    specs = [
        ("dense-linear", [Dense(5, 3), Dense(3, 2)], (5,), (2,), None),
        ("conv-pad1", [Conv2D(2, 3, 3, 3, 1, 1), Flatten(), Dense(5 * 6 * 3, 1)], (5, 6, 2), (1,), None),
        ("conv-stride2", [Conv2D(1, 2, 3, 2, 2, 0), Flatten(), Dense(2 * 3 * 2, 1)], (5, 7, 1), (1,), None),
        ("maxpool", [Conv2D(1, 2, 3, 3, 1, 1), MaxPool(2, 2, 2), Flatten(), Dense(2 * 2 * 2, 1)], (4, 5, 1), (1,), None),
        ("relu", [Dense(4, 6), ReLU(), Dense(6, 1)], (4,), (1,), None),
        ("sigmoid", [Dense(4, 5), Sigmoid(), Dense(5, 2)], (4,), (2,), None),
        ("tanh", [Dense(4, 5), Tanh(), Dense(5, 1)], (4,), (1,), None),
        (
            "wing-like-cnn",
            [
                Conv2D(1, 2, 3, 3, 1, 1), ReLU(), MaxPool(2, 2, 2),
                Conv2D(2, 3, 3, 3, 1, 1), ReLU(), Flatten(),
                Dense(4 * 4 * 3, 6), ReLU(), Dense(6, 1),
            ],
            (8, 9, 1), (1,), None,
        ),
        (
            "sparse-ae-loss",
            [Dense(6, 4), Sigmoid(), Dense(4, 6), Sigmoid()],
            (6,), None, SparseAeObjective(SparseAeLossConfig(0.001, 3.0, 0.1)),
        ),
    ]
    cases = []
    for k, (name, layers, in_shape, out_shape, objective) in enumerate(specs):
        net = Network(layers, in_shape, seed=seed * 1000 + k)
        m = 4
        if objective is None:
            batch = _kink_free_batch(rng, net, (m,) + in_shape)
            targets = rng.normal(size=(m,) + out_shape)
            objective = MseObjective()
        else:
            batch = rng.uniform(0.0, 1.0, size=(m,) + in_shape)
            targets = None
        cases.append(GradCheckCase(name, net, batch, targets, objective))
    return cases


def run_cases(cases, epsilon=DEFAULT_EPSILON, grad_fn=None) -> list[tuple[str, GradCheckResult]]:
    return [(c.name, grad_check(c.net, c.batch, c.objective, c.targets, epsilon, grad_fn)) for c in cases]
