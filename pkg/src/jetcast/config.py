"""INI run configuration.

Sections: ``[data]``, ``[experiment]``, ``[wing1]``, ``[wing2]``, ``[tail]``,
``[tail.layer1]`` .. ``[tail.layerN]``, ``[probe]``, ``[body]``, ``[nose]``.
Missing sections or keys fall back to the defaults; unknown ones are errors.
If any ``tail.layerN`` section is present, those sections are the whole stack.
Floats are written with ``repr`` so a written file reloads to an equal config.
"""

from __future__ import annotations

import configparser
import dataclasses
import io
import re
import typing
from dataclasses import dataclass, field
from pathlib import Path

from .container import atomic_write_text
from .data import DEFAULT_FRACTIONS, LagSpec, SynthConfig
from .errors import ConfigError
from .pipeline import BodyConfig, JetConfig, NoseConfig
from .regressors import CnnConfig, ProbeConfig, TailConfig, TailLayerConfig


@dataclass(frozen=True)
class DataConfig:
    """Either a CSV path or the synthetic generator's settings."""

    csv: str = ""
    synth_length: int = SynthConfig.length
    synth_seed: int = SynthConfig.seed
    synth_noise_std: float = SynthConfig.noise_std
    step_minutes: int = LagSpec.step_minutes
    num_lags: int = LagSpec.num_lags
    train_fraction: float = DEFAULT_FRACTIONS[0]
    val_fraction: float = DEFAULT_FRACTIONS[1]
    test_fraction: float = DEFAULT_FRACTIONS[2]

    @property
    def lag(self) -> LagSpec:
        return LagSpec(self.step_minutes, self.num_lags)

    @property
    def fractions(self) -> tuple[float, float, float]:
        return (self.train_fraction, self.val_fraction, self.test_fraction)

    @property
    def synth(self) -> SynthConfig:
        return SynthConfig(self.synth_length, self.synth_seed, self.synth_noise_std)


@dataclass(frozen=True)
class ExperimentConfig:
    n_runs: int = 10
    base_seed: int = 0
    n_jobs: int = 0  # 0: one worker per available CPU
    baseline: bool = False

    def __post_init__(self):
        if self.n_runs < 1 or self.n_jobs < 0:
            raise ValueError("n_runs must be >= 1 and n_jobs >= 0")


@dataclass(frozen=True)
class RunConfig:
    data: DataConfig = field(default_factory=DataConfig)
    experiment: ExperimentConfig = field(default_factory=ExperimentConfig)
    model: JetConfig = field(default_factory=JetConfig)


_MODEL_SECTIONS = {"wing1": CnnConfig, "wing2": CnnConfig, "probe": ProbeConfig, "body": BodyConfig, "nose": NoseConfig}
_LAYER_SECTION = re.compile(r"^tail\.layer([1-9][0-9]*)$")


def _fmt(value, kind) -> str:
    if kind is bool:
        return "true" if value else "false"
    if kind is float:
        return repr(float(value))
    return str(value)


def _section_items(obj, skip=()) -> dict[str, str]:
    hints = typing.get_type_hints(type(obj))
    return {f.name: _fmt(getattr(obj, f.name), hints[f.name]) for f in dataclasses.fields(obj) if f.name not in skip}


def _parse(cls, section: configparser.SectionProxy, default, skip=()):
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)} - set(skip)
    unknown = set(section) - names - set(section.parser.defaults())
    if unknown:
        raise ConfigError(f"[{section.name}] unknown keys: {', '.join(sorted(unknown))}")
    kwargs = {}
    for name in names:
        if name not in section:
            continue
        kind = hints[name]
        try:
            if kind is bool:
                kwargs[name] = section.getboolean(name)
            elif kind is int:
                kwargs[name] = section.getint(name)
            elif kind is float:
                kwargs[name] = section.getfloat(name)
            else:
                kwargs[name] = section[name]
        except ValueError as exc:
            raise ConfigError(f"[{section.name}] {name}: {exc}") from None
    try:
        return dataclasses.replace(default, **kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section.name}] {exc}") from None


def to_ini(cfg: RunConfig) -> str:
    cp = configparser.ConfigParser(interpolation=None)
    cp["data"] = _section_items(cfg.data)
    cp["experiment"] = _section_items(cfg.experiment)
    m = cfg.model
    for name in ("wing1", "wing2"):
        cp[name] = _section_items(getattr(m, name))
    cp["tail"] = _section_items(m.tail, skip=("layers",))
    for k, row in enumerate(m.tail.layers, start=1):
        cp[f"tail.layer{k}"] = _section_items(row)
    for name in ("probe", "body", "nose"):
        cp[name] = _section_items(getattr(m, name))
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def from_ini(text: str) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"unreadable config: {exc}") from None
    base = RunConfig()
    known = {"data", "experiment", "tail", *_MODEL_SECTIONS}
    layer_ids = {}
    for name in cp.sections():
        hit = _LAYER_SECTION.match(name)
        if hit:
            layer_ids[int(hit.group(1))] = name
        elif name not in known:
            raise ConfigError(f"unknown section [{name}]")

    def get(name, cls, default, skip=()):
        return _parse(cls, cp[name], default, skip) if cp.has_section(name) else default

    if layer_ids:
        if sorted(layer_ids) != list(range(1, len(layer_ids) + 1)):
            raise ConfigError("tail.layerN sections must be numbered 1..N without gaps")
        defaults = base.model.tail.layers
        rows = []
        for k in range(1, len(layer_ids) + 1):
            sec = cp[layer_ids[k]]
            if k <= len(defaults):
                rows.append(_parse(TailLayerConfig, sec, defaults[k - 1]))
            else:
                missing = {f.name for f in dataclasses.fields(TailLayerConfig)} - set(sec)
                if missing:
                    raise ConfigError(f"[{sec.name}] missing keys: {', '.join(sorted(missing))}")
                rows.append(_parse(TailLayerConfig, sec, defaults[-1]))
        layers = tuple(rows)
    else:
        layers = base.model.tail.layers
    tail = get("tail", TailConfig, dataclasses.replace(base.model.tail, layers=layers), skip=("layers",))
    model = JetConfig(
        wing1=get("wing1", CnnConfig, base.model.wing1),
        wing2=get("wing2", CnnConfig, base.model.wing2),
        tail=tail,
        probe=get("probe", ProbeConfig, base.model.probe),
        body=get("body", BodyConfig, base.model.body),
        nose=get("nose", NoseConfig, base.model.nose),
    )
    return RunConfig(get("data", DataConfig, base.data), get("experiment", ExperimentConfig, base.experiment), model)


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return from_ini(text)


def save_config(cfg: RunConfig, path) -> None:
    atomic_write_text(path, to_ini(cfg))
