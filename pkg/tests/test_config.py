import dataclasses

import pytest
from hypothesis import given, settings, strategies as st

from jetcast.config import DataConfig, ExperimentConfig, RunConfig, from_ini, load_config, save_config, to_ini
from jetcast.errors import ConfigError
from jetcast.pipeline import BodyConfig, JetConfig, NoseConfig
from jetcast.regressors import TailConfig, TailLayerConfig

TAIL_ROWS = [
    (50, 50, 0.00003, 4, 0.15),
    (100, 80, 0.00001, 3, 0.1),
    (100, 200, 0.00002, 4, 0.1),
    (175, 75, 0.00001, 3, 0.1),
    (50, 50, 0.00001, 4, 0.1),
    (100, 250, 0.00001, 5, 0.1),
    (55, 100, 0.00002, 4, 0.1),
    (70, 200, 0.00002, 4, 0.1),
]


def test_defaults():
    m = RunConfig().model
    assert (m.wing1.number_of_layers, m.wing2.number_of_layers) == (10, 12)
    assert (m.wing1.number_of_epochs, m.wing2.number_of_epochs) == (5, 50)
    assert m.wing1.initial_learning_rate == m.wing2.initial_learning_rate == 0.001
    rows = [(r.neurons, r.max_epoch, r.l2_weight_regularization, r.sparsity_regularization, r.sparsity_proportion)
            for r in m.tail.layers]
    assert rows == TAIL_ROWS
    assert (m.body.bottleneck, m.nose.hidden) == (200, 26)
    d = RunConfig().data
    assert (d.num_lags, d.step_minutes, d.synth_length) == (7, 10, 52560)
    assert d.fractions == (0.6667, 0.1667, 0.1666)
    assert RunConfig().experiment.n_runs == 10


def test_default_round_trip():
    text = to_ini(RunConfig())
    assert from_ini(text) == RunConfig()
    assert to_ini(from_ini(text)) == text
    assert from_ini("") == RunConfig()


def test_file_round_trip(tmp_path):
    cfg = RunConfig(DataConfig(csv="mast.csv", num_lags=3), ExperimentConfig(n_runs=2, baseline=True),
                    JetConfig(body=BodyConfig(epochs=7)))
    save_config(cfg, tmp_path / "run.ini")
    assert load_config(tmp_path / "run.ini") == cfg
    assert not list(tmp_path.glob("*.tmp*"))


@settings(max_examples=50, deadline=None)
@given(
    lr=st.floats(1e-6, 1.0, allow_nan=False),
    epochs=st.integers(1, 500),
    seed=st.integers(0, 2**63),
    rows=st.lists(st.tuples(st.integers(1, 300), st.integers(1, 300), st.floats(0, 1e-2), st.floats(0, 10),
                            st.floats(0.01, 0.99)), min_size=1, max_size=10),
)
def test_round_trip_property(lr, epochs, seed, rows):
    tail = TailConfig(tuple(TailLayerConfig(*r) for r in rows))
    model = JetConfig(wing1=dataclasses.replace(JetConfig().wing1, initial_learning_rate=lr),
                      tail=tail, nose=NoseConfig(epochs=epochs))
    cfg = RunConfig(experiment=ExperimentConfig(base_seed=seed), model=model)
    assert from_ini(to_ini(cfg)) == cfg


def test_partial_file_keeps_defaults():
    cfg = from_ini("[nose]\nepochs = 3\n[body]\nlearning_rate = 0.01\n")
    assert cfg.model.nose == NoseConfig(epochs=3)
    assert cfg.model.body == BodyConfig(learning_rate=0.01)
    assert cfg.model.tail == TailConfig()


def test_layer_sections_define_the_stack():
    # unlisted keys fall back to the same-numbered default row
    one = from_ini("[tail.layer1]\nneurons = 40\n")
    assert one.model.tail.layers == (dataclasses.replace(TailConfig().layers[0], neurons=40),)
    cfg = from_ini("[tail.layer1]\nneurons = 40\n[tail.layer2]\nneurons = 30\n")
    assert [r.neurons for r in cfg.model.tail.layers] == [40, 30]


@pytest.mark.parametrize("text", [
    "[wing3]\nx = 1\n",
    "[nose]\nhiden = 3\n",
    "[nose]\nepochs = many\n",
    "[tail.layer1]\nneurons = 4\n[tail.layer3]\nneurons = 4\n",
    "[tail.layer9]\nneurons = 4\n",
    "[experiment]\nn_runs = 0\n",
    "[body]\nbottleneck = 0\n",
    "not an ini file",
])
def test_bad_files_are_config_errors(text):
    with pytest.raises(ConfigError):
        from_ini(text)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.ini")
