"""Base regressors: two CNN wings, the stacked sparse-AE tail and the MLP probes.

Layer counting for the wings treats input, each convolution, each
activation, pooling, each fully-connected layer and the regression output as
one layer, so ``number_of_layers = 6 + 2 * n_conv``: 10 layers means two
convolutions, 12 means three.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import LagDataset
from .metrics import rmse
from .nn import (
    Conv2D,
    Dense,
    Flatten,
    MaxPool,
    MseObjective,
    Network,
    ReLU,
    SgdMomentumConfig,
    Sigmoid,
    SparseAeLossConfig,
    SparseAeObjective,
    train,
)
from .errors import ShapeMismatch


# -- CNN wings -------------------------------------------------------------------

@dataclass(frozen=True)
class CnnConfig:
    name: str = "wing1"
    number_of_layers: int = 10
    number_of_epochs: int = 5
    initial_learning_rate: float = 0.001
    momentum: float = 0.9
    batch_size: int = 32
    first_channels: int = 8
    channels: int = 16
    dense_units: int = 128

    def __post_init__(self):
        extra = self.number_of_layers - 6
        if extra < 2 or extra % 2:
            raise ValueError("number_of_layers must be an even number >= 8 (6 + 2 per convolution)")
        SgdMomentumConfig(self.initial_learning_rate, self.momentum, self.number_of_epochs, self.batch_size)

    @property
    def n_conv(self) -> int:
        return (self.number_of_layers - 6) // 2

    @property
    def optimizer(self) -> SgdMomentumConfig:
        return SgdMomentumConfig(self.initial_learning_rate, self.momentum, self.number_of_epochs, self.batch_size)

    def layer_names(self) -> list[str]:
        names = ["Input", "Conv2D", "ReLU", "MaxPool"]
        names += ["Conv2D", "ReLU"] * (self.n_conv - 1)
        names += ["Dense", "ReLU", "Dense", "RegressionOutput"]
        return names


WING1 = CnnConfig("wing1", number_of_layers=10, number_of_epochs=5)
WING2 = CnnConfig("wing2", number_of_layers=12, number_of_epochs=50)


def build_wing_network(cfg: CnnConfig, grid_shape, seed: int) -> Network:
    h, w, c = grid_shape
    layers = [Conv2D(c, cfg.first_channels, 3, 3, 1, 1), ReLU(), MaxPool(2, 2, 2)]
    ch = cfg.first_channels
    for _ in range(cfg.n_conv - 1):
        layers += [Conv2D(ch, cfg.channels, 3, 3, 1, 1), ReLU()]
        ch = cfg.channels
    pooled = ((h - 2) // 2 + 1) * ((w - 2) // 2 + 1) * ch
    layers += [Flatten(), Dense(pooled, cfg.dense_units), ReLU(), Dense(cfg.dense_units, 1)]
    return Network(layers, grid_shape, seed=seed)


@dataclass
class TrainedWing:
    name: str
    net: Network
    feature_layer: int
    val_rmse: list[float] = field(default_factory=list)
    train_loss: list[float] = field(default_factory=list)

    @property
    def feature_width(self) -> int:
        return int(np.prod(self.net.shapes[self.feature_layer + 1]))

    def features(self, X_grid) -> np.ndarray:
        return self.net.features(X_grid, self.feature_layer)

    def predict(self, X_grid) -> np.ndarray:
        return self.net.predict(X_grid)[:, 0]


def train_wing(cfg: CnnConfig, train_data: LagDataset, val_data: LagDataset | None, seed: int) -> TrainedWing:
    """Fit a CNN on ``X_grid -> y``; its last hidden ReLU is the feature map.

    Validation RMSE (scaled units) is recorded after every epoch and never
    feeds back into training.
    """
    net = build_wing_network(cfg, train_data.X_grid.shape[1:], seed)
    wing = TrainedWing(cfg.name, net, feature_layer=len(net.layers) - 2)
    X, y = train_data.X_grid, train_data.y[:, None]

    def monitor(epoch, loss):
        if val_data is not None and len(val_data):
            wing.val_rmse.append(rmse(val_data.y, wing.predict(val_data.X_grid)))

    wing.train_loss = train(net, X, y, cfg.optimizer, seed, MseObjective(), monitor)
    return wing


# -- probe -----------------------------------------------------------------------

@dataclass(frozen=True)
class ProbeConfig:
    hidden: int = 26
    epochs: int = 30
    learning_rate: float = 0.01
    momentum: float = 0.9
    batch_size: int = 32

    @property
    def optimizer(self) -> SgdMomentumConfig:
        return SgdMomentumConfig(self.learning_rate, self.momentum, self.epochs, self.batch_size)


def build_mlp(n_in: int, hidden: int, seed: int) -> Network:
    """``n_in -> hidden (sigmoid) -> 1 (linear)``."""
    return Network([Dense(n_in, hidden), Sigmoid(), Dense(hidden, 1)], (n_in,), seed=seed)


@dataclass
class Probe:
    """One-hidden-layer MLP that scores a feature space as a regressor."""

    net: Network
    train_loss: list[float] = field(default_factory=list)

    def predict(self, features) -> np.ndarray:
        return self.net.predict(features)[:, 0]


def fit_probe(features, targets, seed: int, cfg: ProbeConfig = ProbeConfig()) -> Probe:
    features = np.asarray(features, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if features.ndim != 2 or len(features) != len(targets):
        raise ShapeMismatch(f"features {features.shape} and targets {targets.shape} do not pair up")
    # train on min-max scaled features (sparse codes can span ~1e-3), then fold
    # the scaling into the first layer so the probe consumes raw features
    lo = features.min(axis=0)
    span = features.max(axis=0) - lo
    span[span <= 0] = 1.0
    net = build_mlp(features.shape[1], cfg.hidden, seed)
    history = train(net, (features - lo) / span, targets[:, None], cfg.optimizer, seed)
    W, b = net.params[0], net.params[1]
    W /= span[:, None]
    b -= lo @ W
    return Probe(net, history)


# -- sparse autoencoder tail -----------------------------------------------------------

@dataclass(frozen=True)
class TailLayerConfig:
    neurons: int
    max_epoch: int
    l2_weight_regularization: float
    sparsity_regularization: float
    sparsity_proportion: float

    def __post_init__(self):
        if self.neurons < 1 or self.max_epoch < 1:
            raise ValueError("neurons and max_epoch must be >= 1")
        self.loss_config  # validates the regularisation fields

    @property
    def loss_config(self) -> SparseAeLossConfig:
        return SparseAeLossConfig(
            self.l2_weight_regularization, self.sparsity_regularization, self.sparsity_proportion
        )


DEFAULT_TAIL_LAYERS = (
    TailLayerConfig(50, 50, 0.00003, 4, 0.15),
    TailLayerConfig(100, 80, 0.00001, 3, 0.1),
    TailLayerConfig(100, 200, 0.00002, 4, 0.1),
    TailLayerConfig(175, 75, 0.00001, 3, 0.1),
    TailLayerConfig(50, 50, 0.00001, 4, 0.1),
    TailLayerConfig(100, 250, 0.00001, 5, 0.1),
    TailLayerConfig(55, 100, 0.00002, 4, 0.1),
    TailLayerConfig(70, 200, 0.00002, 4, 0.1),
)


@dataclass(frozen=True)
class TailConfig:
    layers: tuple[TailLayerConfig, ...] = DEFAULT_TAIL_LAYERS
    learning_rate: float = 0.1
    momentum: float = 0.9
    batch_size: int = 256

    def __post_init__(self):
        if not self.layers:
            raise ValueError("tail needs at least one layer")
        object.__setattr__(self, "layers", tuple(self.layers))

    def optimizer(self, layer: TailLayerConfig) -> SgdMomentumConfig:
        return SgdMomentumConfig(self.learning_rate, self.momentum, layer.max_epoch, self.batch_size)

    def without_sparsity(self) -> "TailConfig":
        """Same stack with every sparsity weight set to 0 (the control used in tests)."""
        rows = tuple(
            TailLayerConfig(r.neurons, r.max_epoch, r.l2_weight_regularization, 0.0, r.sparsity_proportion)
            for r in self.layers
        )
        return TailConfig(rows, self.learning_rate, self.momentum, self.batch_size)


def build_autoencoder(n_in: int, n_hidden: int, seed: int, output=Sigmoid) -> Network:
    layers = [Dense(n_in, n_hidden), Sigmoid(), Dense(n_hidden, n_in)]
    if output is not None:
        layers.append(output())
    return Network(layers, (n_in,), seed=seed)


def encoder_of(ae: Network) -> Network:
    """Copy of the ``Dense, Sigmoid`` front half of an autoencoder."""
    enc = Network([Dense(*ae.layers[0].W.shape), Sigmoid()], ae.input_shape)
    enc.seed = ae.seed
    enc.params[0][...] = ae.params[0]
    enc.params[1][...] = ae.params[1]
    return enc


@dataclass
class TrainedTail:
    encoders: list[Network]
    probe: Probe | None = None
    histories: list[list[float]] = field(default_factory=list)

    @property
    def code_width(self) -> int:
        return self.encoders[-1].output_shape[0]

    def codes(self, X) -> list[np.ndarray]:
        """Hidden activations of every layer, shallowest first."""
        out = []
        h = np.asarray(X, dtype=np.float64)
        for enc in self.encoders:
            h = enc.predict(h)
            out.append(h)
        return out

    def mean_activations(self, X) -> list[np.ndarray]:
        return [c.mean(axis=0) for c in self.codes(X)]


def layer_seed(seed: int, k: int) -> int:
    return seed * 100 + k


def train_tail(cfg: TailConfig, train_data: LagDataset, seed: int, probe: ProbeConfig | None = ProbeConfig()) -> TrainedTail:
    """Greedy layer-wise sparse autoencoder stack on ``X_flat``.

    Layer ``k`` is a ``Dense-Sigmoid-Dense-Sigmoid`` autoencoder trained on
    the codes of layer ``k-1`` with its own epochs and regularisation; the
    earlier encoders are frozen copies and are never touched again.  When
    ``probe`` is given, an MLP is fitted from the deepest code to ``y``.
    """
    X = train_data.X_flat
    encoders, histories = [], []
    h = X
    for k, row in enumerate(cfg.layers):
        ae = build_autoencoder(h.shape[1], row.neurons, layer_seed(seed, k))
        histories.append(train(ae, h, None, cfg.optimizer(row), layer_seed(seed, k), SparseAeObjective(row.loss_config)))
        enc = encoder_of(ae)
        encoders.append(enc)
        h = enc.predict(h)
    tail = TrainedTail(encoders, None, histories)
    if probe is not None:
        tail.probe = fit_probe(h, train_data.y, seed, probe)
    return tail


def tail_encode(tail: TrainedTail, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1:] != tail.encoders[0].input_shape:
        raise ShapeMismatch(f"tail expects (n, {tail.encoders[0].input_shape[0]}), got {X.shape}")
    return tail.codes(X)[-1]
