import numpy as np
import pytest

from jetcast.data import LagDataset, LagSpec, apply_scaler, build_lag_matrix, fit_scaler
from jetcast.nn import MseObjective, SgdMomentumConfig, SparseAeObjective, train
from jetcast.regressors import (
    DEFAULT_TAIL_LAYERS,
    WING1,
    WING2,
    CnnConfig,
    ProbeConfig,
    TailConfig,
    TailLayerConfig,
    build_autoencoder,
    build_wing_network,
    fit_probe,
    layer_seed,
    tail_encode,
    train_tail,
    train_wing,
)
from jetcast.errors import ShapeMismatch

EXPECTED_ROWS = [
    (50, 50, 0.00003, 4, 0.15),
    (100, 80, 0.00001, 3, 0.1),
    (100, 200, 0.00002, 4, 0.1),
    (175, 75, 0.00001, 3, 0.1),
    (50, 50, 0.00001, 4, 0.1),
    (100, 250, 0.00001, 5, 0.1),
    (55, 100, 0.00002, 4, 0.1),
    (70, 200, 0.00002, 4, 0.1),
]


@pytest.fixture(scope="module")
def scaled(small_series):
    rows = build_lag_matrix(small_series, LagSpec())
    return apply_scaler(fit_scaler(rows), rows)


def _short_tail(epochs=2):
    return TailConfig(tuple(TailLayerConfig(r.neurons, epochs, r.l2_weight_regularization, r.sparsity_regularization,
                                            r.sparsity_proportion) for r in DEFAULT_TAIL_LAYERS))


# -- configuration -----------------------------------------------------------------

def test_wing_defaults():
    assert (WING1.number_of_layers, WING1.number_of_epochs, WING1.initial_learning_rate) == (10, 5, 0.001)
    assert (WING2.number_of_layers, WING2.number_of_epochs, WING2.initial_learning_rate) == (12, 50, 0.001)
    assert WING1.optimizer.momentum == WING2.optimizer.momentum == 0.9


def test_layer_counting_convention():
    assert WING1.layer_names() == ["Input", "Conv2D", "ReLU", "MaxPool", "Conv2D", "ReLU",
                                   "Dense", "ReLU", "Dense", "RegressionOutput"]
    assert len(WING2.layer_names()) == 12 and WING2.layer_names().count("Conv2D") == 3
    with pytest.raises(ValueError):
        CnnConfig(number_of_layers=9)


def test_wing_networks_end_in_one_unit():
    for cfg, n_conv in ((WING1, 2), (WING2, 3)):
        net = build_wing_network(cfg, (8, 9, 1), seed=0)
        assert net.output_shape == (1,)
        assert sum(type(l).__name__ == "Conv2D" for l in net.layers) == n_conv
        assert net.shapes[len(net.layers) - 1] == (128,)


def test_tail_rows_field_for_field():
    assert [(r.neurons, r.max_epoch, r.l2_weight_regularization, r.sparsity_regularization, r.sparsity_proportion)
            for r in DEFAULT_TAIL_LAYERS] == EXPECTED_ROWS
    first = TailConfig().layers[0].loss_config
    assert (first.sparsity_prop, first.sparsity_reg, first.l2_weight) == (0.15, 4, 0.00003)


def test_control_only_drops_sparsity():
    ctrl = TailConfig().without_sparsity()
    for a, b in zip(ctrl.layers, TailConfig().layers):
        assert a.sparsity_regularization == 0
        assert (a.neurons, a.max_epoch, a.l2_weight_regularization, a.sparsity_proportion) == (
            b.neurons, b.max_epoch, b.l2_weight_regularization, b.sparsity_proportion)


# -- wings ---------------------------------------------------------------------------

def test_wing_training_records_validation(scaled):
    cfg = CnnConfig("w", 10, 2, batch_size=64)
    wing = train_wing(cfg, scaled.take(0, 300), scaled.take(300, 400), seed=1)
    assert len(wing.val_rmse) == 2 and len(wing.train_loss) == 2
    assert wing.features(scaled.X_grid[:5]).shape == (5, 128)
    assert wing.feature_width == 128
    again = train_wing(cfg, scaled.take(0, 300), scaled.take(300, 400), seed=1)
    assert np.array_equal(wing.predict(scaled.X_grid), again.predict(scaled.X_grid))


def test_wing_on_constant_target(scaled):
    const = LagDataset(scaled.X_flat, np.full(len(scaled), 0.4), scaled.timestamps, scaled.num_lags)
    wing = train_wing(CnnConfig("w", 10, 60, initial_learning_rate=0.01), const.take(0, 400), const.take(400, 500), 0)
    pred = wing.predict(const.X_grid[400:])
    assert abs(pred.mean() - 0.4) < 0.03
    assert wing.val_rmse[-1] < 0.03 and wing.val_rmse[-1] < 0.5 * wing.val_rmse[0]
    assert wing.train_loss[-1] < 1e-3


# -- tail ------------------------------------------------------------------------------

def test_tail_code_widths(scaled):
    tail = train_tail(_short_tail(), scaled, seed=0, probe=None)
    assert [c.shape[1] for c in tail.codes(scaled.X_flat[:4])] == [50, 100, 100, 175, 50, 100, 55, 70]
    assert tail.code_width == 70
    one = tail_encode(tail, scaled.X_flat[:1])
    assert one.shape == (1, 70)
    assert np.array_equal(one, tail_encode(tail, scaled.X_flat[:1]))
    np.testing.assert_allclose(one, tail_encode(tail, scaled.X_flat[:9])[:1], rtol=1e-13, atol=1e-15)
    with pytest.raises(ShapeMismatch):
        tail_encode(tail, scaled.X_flat[:, :10])


def test_greedy_isolation(scaled):
    """Adding a layer leaves the earlier encoders exactly as they were."""
    two = TailConfig(_short_tail(3).layers[:2])
    three = TailConfig(_short_tail(3).layers[:3])
    a = train_tail(two, scaled, seed=5, probe=None)
    b = train_tail(three, scaled, seed=5, probe=None)
    for ea, eb in zip(a.encoders, b.encoders[:2]):
        assert all(np.array_equal(p, q) for p, q in zip(ea.params, eb.params))
    assert layer_seed(5, 0) != layer_seed(5, 1)


def test_single_layer_learns_passthrough_data():
    rng = np.random.default_rng(0)
    x = rng.random((400, 1))
    row = TailLayerConfig(4, 300, 0.0, 0.0, 0.1)
    before = MseObjective().value(build_autoencoder(1, 4, layer_seed(3, 0)), x, x)
    ae = build_autoencoder(1, 4, layer_seed(3, 0))
    train(ae, x, None, SgdMomentumConfig(0.5, 0.9, 300, 32), 3, SparseAeObjective(row.loss_config))
    assert MseObjective().value(ae, x, x) < before


# -- probes ------------------------------------------------------------------------------

def test_probe_width_and_constant_targets():
    rng = np.random.default_rng(1)
    f = rng.random((3000, 5))
    probe = fit_probe(f, np.full(3000, 0.3), seed=0)
    assert probe.net.params[0].shape == (5, 26)
    assert np.sqrt(np.mean((probe.predict(f) - 0.3) ** 2)) < 1e-3


def test_probe_learns_identity_feature():
    rng = np.random.default_rng(2)
    y = rng.random(500)
    probe = fit_probe(y[:, None], y, seed=0, cfg=ProbeConfig(epochs=200))
    assert np.sqrt(np.mean((probe.predict(y[:, None]) - y) ** 2)) < 0.02


def test_probe_handles_tiny_feature_range():
    rng = np.random.default_rng(3)
    y = rng.random(500)
    f = 0.1 + 1e-4 * y[:, None]  # a near-collapsed sparse code still carrying signal
    probe = fit_probe(f, y, seed=0, cfg=ProbeConfig(epochs=100))
    assert np.sqrt(np.mean((probe.predict(f) - y) ** 2)) < 0.05


def test_probe_shape_errors():
    with pytest.raises(ShapeMismatch):
        fit_probe(np.zeros((4, 2)), np.zeros(5), seed=0)
