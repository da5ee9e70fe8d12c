"""The three-phase ensemble: base regressors, autoencoder reduction, MLP combiner.

Phase 1 trains the two CNN wings and the sparse-AE tail on the training
rows.  Phase 2 concatenates ``[original | wing1 | wing2 | tail]`` and fits a
single-hidden-layer autoencoder (the body) whose sigmoid code is the reduced
space.  Phase 3 trains the nose MLP on ``[reduced | original]``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from . import container
from .data import LagDataset, MinMaxScaler, apply_scaler, fit_scaler
from .errors import BottleneckTooWide, LoadError, RowCountMismatch, ShapeMismatch
from .metrics import rmse
from .nn import MseObjective, Network, SgdMomentumConfig, train
from .regressors import (
    WING1,
    WING2,
    CnnConfig,
    Probe,
    ProbeConfig,
    TailConfig,
    TailLayerConfig,
    TrainedTail,
    TrainedWing,
    build_autoencoder,
    build_mlp,
    fit_probe,
    tail_encode,
    train_tail,
    train_wing,
)

STAGES = ("wing1", "wing2", "tail", "body", "nose")

# sub-seed offsets within one pipeline fit
SEED_OFFSETS = {"wing1": 0, "wing2": 1, "tail": 2, "body": 3, "nose": 4, "body_probe": 5, "baseline": 6}


@dataclass(frozen=True)
class BodyConfig:
    bottleneck: int = 200
    epochs: int = 100
    learning_rate: float = 0.001
    momentum: float = 0.9
    batch_size: int = 32

    def __post_init__(self):
        if self.bottleneck < 1:
            raise ValueError("bottleneck must be >= 1")

    @property
    def optimizer(self) -> SgdMomentumConfig:
        return SgdMomentumConfig(self.learning_rate, self.momentum, self.epochs, self.batch_size)


@dataclass(frozen=True)
class NoseConfig:
    hidden: int = 26
    epochs: int = 200
    learning_rate: float = 0.001
    momentum: float = 0.9
    batch_size: int = 32

    def __post_init__(self):
        if self.hidden < 1:
            raise ValueError("hidden must be >= 1")

    @property
    def optimizer(self) -> SgdMomentumConfig:
        return SgdMomentumConfig(self.learning_rate, self.momentum, self.epochs, self.batch_size)


@dataclass(frozen=True)
class JetConfig:
    wing1: CnnConfig = WING1
    wing2: CnnConfig = WING2
    tail: TailConfig = TailConfig()
    probe: ProbeConfig = ProbeConfig()
    body: BodyConfig = BodyConfig()
    nose: NoseConfig = NoseConfig()

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "JetConfig":
        tail = dict(d["tail"])
        tail["layers"] = tuple(TailLayerConfig(**row) for row in tail["layers"])
        return cls(
            wing1=CnnConfig(**d["wing1"]),
            wing2=CnnConfig(**d["wing2"]),
            tail=TailConfig(**tail),
            probe=ProbeConfig(**d["probe"]),
            body=BodyConfig(**d["body"]),
            nose=NoseConfig(**d["nose"]),
        )


def assemble_concat_features(original, wing1_f, wing2_f, tail_codes) -> np.ndarray:
    """Column-stack ``[original | wing1 | wing2 | tail]``."""
    blocks = [np.asarray(b, dtype=np.float64) for b in (original, wing1_f, wing2_f, tail_codes)]
    rows = {len(b) for b in blocks}
    if len(rows) != 1:
        raise RowCountMismatch(f"feature blocks have row counts {[len(b) for b in blocks]}")
    return np.concatenate([b.reshape(len(b), -1) for b in blocks], axis=1)


def train_body(concat_train, cfg: BodyConfig, seed: int) -> Network:
    """Identity-mapping autoencoder (sigmoid code, linear reconstruction, plain MSE)."""
    X = np.asarray(concat_train, dtype=np.float64)
    if cfg.bottleneck >= X.shape[1]:
        raise BottleneckTooWide(f"bottleneck {cfg.bottleneck} must be below input width {X.shape[1]}")
    ae = build_autoencoder(X.shape[1], cfg.bottleneck, seed, output=None)
    train(ae, X, X, cfg.optimizer, seed, MseObjective())
    return ae


def body_encode(body: Network, X) -> np.ndarray:
    return body.features(X, 1)


def train_nose(reduced, original, targets, cfg: NoseConfig, seed: int) -> Network:
    """MLP ``[reduced | original] -> hidden (sigmoid) -> 1``."""
    reduced = np.asarray(reduced, dtype=np.float64)
    original = np.asarray(original, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if not len(reduced) == len(original) == len(targets):
        raise RowCountMismatch("reduced, original and targets differ in row count")
    X = np.concatenate([reduced, original], axis=1)
    net = build_mlp(X.shape[1], cfg.hidden, seed)
    train(net, X, targets[:, None], cfg.optimizer, seed, MseObjective())
    return net


@dataclass
class JetPipeline:
    config: JetConfig
    num_lags: int
    scaler: MinMaxScaler
    wing1: TrainedWing
    wing2: TrainedWing
    tail: TrainedTail
    body: Network
    nose: Network
    body_probe: Probe | None = None
    seed: int = 0
    val_rmse: dict = field(default_factory=dict)

    @property
    def widths(self) -> dict[str, int]:
        original = self.scaler.feature_min.size
        concat = original + self.wing1.feature_width + self.wing2.feature_width + self.tail.code_width
        bottleneck = self.body.shapes[2][0]
        return {"original": original, "concat": concat, "body": bottleneck, "nose_input": bottleneck + original}

    def scale(self, rows: LagDataset) -> LagDataset:
        if rows.num_lags != self.num_lags:
            raise ShapeMismatch(f"rows built with {rows.num_lags} lags, pipeline expects {self.num_lags}")
        return apply_scaler(self.scaler, rows)

    def concat_features(self, scaled: LagDataset) -> np.ndarray:
        return assemble_concat_features(
            scaled.X_flat,
            self.wing1.features(scaled.X_grid),
            self.wing2.features(scaled.X_grid),
            tail_encode(self.tail, scaled.X_flat),
        )

    def nose_inputs(self, scaled: LagDataset) -> np.ndarray:
        reduced = body_encode(self.body, self.concat_features(scaled))
        return np.concatenate([reduced, scaled.X_flat], axis=1)

    def stage_predictions(self, rows: LagDataset) -> dict[str, np.ndarray]:
        """Denormalised predictions (m/s) of every stage that has a regression head."""
        scaled = self.scale(rows)
        concat = self.concat_features(scaled)
        reduced = body_encode(self.body, concat)
        out = {
            "wing1": self.wing1.predict(scaled.X_grid),
            "wing2": self.wing2.predict(scaled.X_grid),
            "tail": self.tail.probe.predict(tail_encode(self.tail, scaled.X_flat)) if self.tail.probe else None,
            "body": self.body_probe.predict(reduced) if self.body_probe else None,
            "nose": self.nose.predict(np.concatenate([reduced, scaled.X_flat], axis=1))[:, 0],
        }
        return {k: self.scaler.invert_target(v) for k, v in out.items() if v is not None}


def fit_pipeline(train_rows: LagDataset, val_rows: LagDataset | None, config: JetConfig = JetConfig(),
                 seed: int = 0, body_probe: bool = True) -> JetPipeline:
    """Fit the scaler and all three phases on ``train_rows`` (raw units).

    ``val_rows`` is only scored for monitoring.  Sub-models use
    ``seed + SEED_OFFSETS[name]``.
    """
    scaler = fit_scaler(train_rows)
    tr = apply_scaler(scaler, train_rows)
    va = apply_scaler(scaler, val_rows) if val_rows is not None and len(val_rows) else None

    wing1 = train_wing(config.wing1, tr, va, seed + SEED_OFFSETS["wing1"])
    wing2 = train_wing(config.wing2, tr, va, seed + SEED_OFFSETS["wing2"])
    tail = train_tail(config.tail, tr, seed + SEED_OFFSETS["tail"], config.probe)

    concat = assemble_concat_features(tr.X_flat, wing1.features(tr.X_grid), wing2.features(tr.X_grid),
                                      tail_encode(tail, tr.X_flat))
    body = train_body(concat, config.body, seed + SEED_OFFSETS["body"])
    reduced = body_encode(body, concat)
    nose = train_nose(reduced, tr.X_flat, tr.y, config.nose, seed + SEED_OFFSETS["nose"])
    probe = fit_probe(reduced, tr.y, seed + SEED_OFFSETS["body_probe"], config.probe) if body_probe else None

    pipe = JetPipeline(config, train_rows.num_lags, scaler, wing1, wing2, tail, body, nose, probe, seed)
    if va is not None:
        preds = pipe.stage_predictions(val_rows)
        pipe.val_rmse = {k: rmse(val_rows.y, v) for k, v in preds.items()}
    return pipe


def predict(pipe: JetPipeline, rows: LagDataset) -> np.ndarray:
    """Final wind-speed forecast in m/s, one per row, order preserved."""
    scaled = pipe.scale(rows)
    out = pipe.nose.predict(pipe.nose_inputs(scaled))[:, 0]
    return pipe.scaler.invert_target(out)


# -- persistence ---------------------------------------------------------------

FORMAT = "jetcast-pipeline"
FORMAT_VERSION = 1


def _networks(pipe: JetPipeline) -> dict[str, Network]:
    nets = {"wing1": pipe.wing1.net, "wing2": pipe.wing2.net, "body": pipe.body, "nose": pipe.nose}
    for k, enc in enumerate(pipe.tail.encoders):
        nets[f"tail.{k}"] = enc
    if pipe.tail.probe is not None:
        nets["tail_probe"] = pipe.tail.probe.net
    if pipe.body_probe is not None:
        nets["body_probe"] = pipe.body_probe.net
    return nets


def save_pipeline(pipe: JetPipeline, path) -> None:
    nets = _networks(pipe)
    arrays = {f"scaler/{k}": v for k, v in pipe.scaler.to_arrays().items()}
    for name, net in nets.items():
        for i, p in enumerate(net.params):
            arrays[f"{name}/p{i:03d}"] = p
    meta = {
        "format": FORMAT,
        "version": FORMAT_VERSION,
        "config": pipe.config.to_dict(),
        "num_lags": pipe.num_lags,
        "seed": pipe.seed,
        "widths": pipe.widths,
        "networks": {name: net.spec() for name, net in nets.items()},
        "feature_layers": {"wing1": pipe.wing1.feature_layer, "wing2": pipe.wing2.feature_layer},
        "val_rmse": pipe.val_rmse,
    }
    container.save(path, meta, arrays)


def load_pipeline(path) -> JetPipeline:
    meta, arrays = container.load(path)
    if meta.get("format") != FORMAT or meta.get("version") != FORMAT_VERSION:
        raise LoadError(f"{path} is not a {FORMAT} v{FORMAT_VERSION} container")
    try:
        nets = {}
        for name, spec in meta["networks"].items():
            keys = sorted(k for k in arrays if k.startswith(name + "/"))
            nets[name] = Network.from_spec(spec, [arrays[k] for k in keys])
        scaler = MinMaxScaler.from_arrays({k.split("/", 1)[1]: v for k, v in arrays.items() if k.startswith("scaler/")})
        config = JetConfig.from_dict(meta["config"])
        n_tail = sum(1 for k in nets if k.startswith("tail."))
        tail = TrainedTail([nets[f"tail.{k}"] for k in range(n_tail)],
                           Probe(nets["tail_probe"]) if "tail_probe" in nets else None)
        fl = meta["feature_layers"]
        return JetPipeline(
            config,
            meta["num_lags"],
            scaler,
            TrainedWing("wing1", nets["wing1"], fl["wing1"]),
            TrainedWing("wing2", nets["wing2"], fl["wing2"]),
            tail,
            nets["body"],
            nets["nose"],
            Probe(nets["body_probe"]) if "body_probe" in nets else None,
            meta["seed"],
            meta.get("val_rmse", {}),
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise LoadError(f"malformed pipeline container: {exc}") from None
