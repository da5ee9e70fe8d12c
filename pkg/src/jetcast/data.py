"""Wind-farm time series: CSV ingestion, synthesis, lag lattice, scaling, splits.

The on-disk schema is one row per 10-minute interval::

    timestamp,wd_mean_78_5,wd_std_78_5,wd_mean_28_5,wd_std_28_5,
    temp_mean_5,temp_mean_80,humidity,pressure,ws_81_5,ws_80,ws_60,ws_10

``timestamp`` is integer minutes since the Unix epoch.  The eight columns
between it and the wind speeds are the model inputs; the forecasting target
is the mean of the four height speeds.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterator, NamedTuple

import numpy as np

from .errors import (
    CadenceGap,
    DataNotFound,
    EmptySplit,
    MalformedRow,
    NonMonotonicTimestamp,
    SchemaMismatch,
    SeriesTooShort,
)

FEATURE_COLUMNS = (
    "wd_mean_78_5",
    "wd_std_78_5",
    "wd_mean_28_5",
    "wd_std_28_5",
    "temp_mean_5",
    "temp_mean_80",
    "humidity",
    "pressure",
)
SPEED_COLUMNS = ("ws_81_5", "ws_80", "ws_60", "ws_10")
SPEED_HEIGHTS = (81.5, 80.0, 60.0, 10.0)
HEADER = ("timestamp",) + FEATURE_COLUMNS + SPEED_COLUMNS
N_FEATURES = len(FEATURE_COLUMNS)
CADENCE_MINUTES = 10


class RawRecord(NamedTuple):
    timestamp: int
    wd_mean_78_5: float
    wd_std_78_5: float
    wd_mean_28_5: float
    wd_std_28_5: float
    temp_mean_5: float
    temp_mean_80: float
    humidity: float
    pressure: float
    ws_81_5: float
    ws_80: float
    ws_60: float
    ws_10: float


def mean_speed(speeds: np.ndarray) -> np.ndarray:
    """Average of the four height speeds, summed left to right then halved twice."""
    speeds = np.asarray(speeds, dtype=np.float64)
    return (speeds[..., 0] + speeds[..., 1] + speeds[..., 2] + speeds[..., 3]) / 4.0


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Columnar view of validated records.

    ``features`` is ``(n, 8)`` in ``FEATURE_COLUMNS`` order and ``speeds`` is
    ``(n, 4)`` in ``SPEED_COLUMNS`` order.
    """

    timestamps: np.ndarray
    features: np.ndarray
    speeds: np.ndarray

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype=np.int64)
        feats = np.asarray(self.features, dtype=np.float64)
        speeds = np.asarray(self.speeds, dtype=np.float64)
        if feats.ndim != 2 or feats.shape[1] != N_FEATURES:
            raise SchemaMismatch(f"features must be (n, {N_FEATURES}), got {feats.shape}")
        if speeds.shape != (len(feats), len(SPEED_COLUMNS)) or ts.shape != (len(feats),):
            raise SchemaMismatch("timestamps, features and speeds disagree in length")
        for name, arr in (("timestamps", ts), ("features", feats), ("speeds", speeds)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return len(self.timestamps)

    @cached_property
    def target(self) -> np.ndarray:
        out = mean_speed(self.speeds)
        out.setflags(write=False)
        return out

    def records(self) -> Iterator[RawRecord]:
        for t, f, s in zip(self.timestamps, self.features, self.speeds):
            yield RawRecord(int(t), *map(float, f), *map(float, s))

    @classmethod
    def from_records(cls, records) -> "TimeSeries":
        rows = list(records)
        if not rows:
            return cls(np.zeros(0, np.int64), np.zeros((0, N_FEATURES)), np.zeros((0, 4)))
        arr = np.array([r[1:] for r in rows], dtype=np.float64)
        return cls(
            np.array([r[0] for r in rows], dtype=np.int64),
            arr[:, :N_FEATURES],
            arr[:, N_FEATURES:],
        )

    def slice(self, start: int, stop: int) -> "TimeSeries":
        return TimeSeries(self.timestamps[start:stop], self.features[start:stop], self.speeds[start:stop])


# -- CSV ---------------------------------------------------------------------

def load_csv(path) -> TimeSeries:
    """Read and validate a wind-farm CSV.

    Raises MalformedRow, NonMonotonicTimestamp or CadenceGap carrying the
    offending line number, SchemaMismatch for a bad header, DataNotFound when
    the file does not exist.
    """
    path = Path(path)
    if not path.is_file():
        raise DataNotFound(f"no such data file: {path}")
    timestamps: list[int] = []
    values: list[list[float]] = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != HEADER:
            raise SchemaMismatch(f"{path}: header must be exactly {','.join(HEADER)}")
        for line, row in enumerate(reader, start=2):
            if len(row) != len(HEADER):
                raise MalformedRow(f"expected {len(HEADER)} fields, got {len(row)}", line)
            try:
                ts = int(row[0])
                vals = [float(v) for v in row[1:]]
            except ValueError as exc:
                raise MalformedRow(f"non-numeric field ({exc})", line) from None
            if not all(math.isfinite(v) for v in vals):
                raise MalformedRow("non-finite value", line)
            if any(v < 0 for v in vals[N_FEATURES:]):
                raise MalformedRow("negative wind speed", line)
            if timestamps:
                dt = ts - timestamps[-1]
                if dt <= 0:
                    raise NonMonotonicTimestamp(f"timestamp {ts} does not follow {timestamps[-1]}", line)
                if dt != CADENCE_MINUTES:
                    raise CadenceGap(f"gap of {dt} minutes (expected {CADENCE_MINUTES})", line)
            timestamps.append(ts)
            values.append(vals)
    arr = np.array(values, dtype=np.float64).reshape(-1, len(HEADER) - 1)
    return TimeSeries(np.array(timestamps, dtype=np.int64), arr[:, :N_FEATURES], arr[:, N_FEATURES:])


def write_csv(series: TimeSeries, path) -> None:
    """Write ``series`` atomically; floats use ``repr`` so reloading is exact."""
    path = Path(path)
    tmp = path.with_name(f".{path.name}.tmp{os.getpid()}")
    try:
        with tmp.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(HEADER)
            for rec in series.records():
                writer.writerow([rec[0], *(repr(v) for v in rec[1:])])
        os.replace(tmp, path)
    finally:
        if tmp.exists():
            tmp.unlink()


# -- synthetic data -----------------------------------------------------------

@dataclass(frozen=True)
class SynthConfig:
    length: int = 52560
    seed: int = 0
    noise_std: float = 0.4
    start_minute: int = 22616640  # 2013-01-01T00:00Z


DAY_STEPS = 144


def _ar1(rng: np.random.Generator, n: int, phi: float, sigma: float) -> np.ndarray:
    eps = rng.normal(0.0, sigma, n)
    out = np.empty(n)
    acc = 0.0
    for i in range(n):
        acc = phi * acc + eps[i]
        out[i] = acc
    return out


def shear_exponent(temp_mean_5, temp_mean_80):
    """Power-law shear exponent; stable stratification (warm aloft) raises it."""
    return 0.14 + 0.1 * np.tanh(np.asarray(temp_mean_80) - np.asarray(temp_mean_5) + 1.0)


def speed_level(t, pressure, temp_mean_5, temp_mean_80, wd_mean_78_5, humidity):
    """Equilibrium hub speed the process relaxes towards at step ``t``.

    Driver arguments are the values observed one step earlier.
    """
    phase = 2.0 * np.pi * np.asarray(t) / DAY_STEPS
    return (
        7.0
        + 2.0 * np.sin(phase - np.pi / 3.0)
        - 1.5 * np.tanh((np.asarray(pressure) - 1008.0) / 3.0)
        - 1.2 * np.tanh(np.asarray(temp_mean_80) - np.asarray(temp_mean_5) + 1.0)
        + 0.8 * np.cos(np.radians(np.asarray(wd_mean_78_5) - 220.0))
        - 0.02 * (np.asarray(humidity) - 55.0)
    )


def synth_generate(config: SynthConfig = SynthConfig()) -> TimeSeries:
    """Deterministic synthetic wind-farm year (or any length).

    Drivers are generated first: diurnal temperatures at 5 m and 80 m,
    humidity anti-correlated with temperature, a slow pressure random
    process and a mean-reverting wind direction.  The 80 m speed ``s``
    then follows::

        level[t] = speed_level(t, drivers[t-1])
        s[t] = max(0, s[t-1] + 0.12*(level[t] - s[t-1]) + 0.3*(s[t-1] - s[t-2])
                      + noise_std * (0.6 + 0.08*s[t-1]) * eps[t])

    with ``s[0] = s[1] = level(0, drivers[0])``.  Height speeds are
    ``s * (h/80)**alpha`` with ``alpha = shear_exponent(temps[t])`` plus a
    small multiplicative height jitter proportional to ``noise_std``, so
    ``ws_80 == s`` exactly when ``noise_std`` is 0.  Direction spread grows
    as speed drops (turbulence proxy).
    """
    if config.length < 1:
        raise ValueError("synthetic length must be >= 1")
    n = config.length
    rng = np.random.default_rng(config.seed)
    t = np.arange(n)
    phase = 2.0 * np.pi * t / DAY_STEPS

    temp5 = 24.0 + 6.0 * np.sin(phase - np.pi / 2.0) + _ar1(rng, n, 0.98, 0.3)
    temp80 = temp5 - 1.0 - 2.0 * np.sin(phase - np.pi / 2.0) + _ar1(rng, n, 0.95, 0.2)
    humidity = np.clip(55.0 - 1.8 * (temp5 - 24.0) + _ar1(rng, n, 0.99, 0.8), 5.0, 100.0)
    pressure = 1008.0 + _ar1(rng, n, 0.999, 0.08)
    wd78 = np.mod(210.0 + _ar1(rng, n, 0.995, 2.5), 360.0)
    wd28 = np.mod(wd78 + 8.0 + rng.normal(0.0, 3.0, n), 360.0)

    eps = rng.normal(0.0, 1.0, n)
    level = speed_level(t[1:], pressure[:-1], temp5[:-1], temp80[:-1], wd78[:-1], humidity[:-1])
    s = np.empty(n)
    s[0] = float(speed_level(0, pressure[0], temp5[0], temp80[0], wd78[0], humidity[0]))
    if n > 1:
        s[1] = s[0]
    noise = config.noise_std
    for i in range(2, n):
        prev = s[i - 1]
        nxt = prev + 0.12 * (level[i - 1] - prev) + 0.3 * (prev - s[i - 2]) + noise * (0.6 + 0.08 * prev) * eps[i]
        s[i] = nxt if nxt > 0.0 else 0.0

    alpha = shear_exponent(temp5, temp80)
    jitter = rng.normal(0.0, 1.0, (n, 4))
    speeds = np.empty((n, 4))
    for j, h in enumerate(SPEED_HEIGHTS):
        speeds[:, j] = s * (h / 80.0) ** alpha * (1.0 + 0.05 * noise * jitter[:, j])
    speeds = np.maximum(speeds, 0.0)

    spread = 4.0 + 30.0 / (1.0 + s)
    wd_std78 = spread * np.exp(rng.normal(0.0, 0.1, n))
    wd_std28 = 1.3 * spread * np.exp(rng.normal(0.0, 0.1, n))

    features = np.column_stack([wd78, wd_std78, wd28, wd_std28, temp5, temp80, humidity, pressure])
    timestamps = config.start_minute + CADENCE_MINUTES * t.astype(np.int64)
    return TimeSeries(timestamps, features, speeds)


# -- lag lattice -------------------------------------------------------------

@dataclass(frozen=True)
class LagSpec:
    step_minutes: int = 10
    num_lags: int = 7

    def __post_init__(self):
        if self.step_minutes <= 0:
            raise ValueError("step_minutes must be positive")
        if self.num_lags < 0:
            raise ValueError("num_lags must be >= 0")

    @property
    def width(self) -> int:
        return N_FEATURES + self.num_lags * (N_FEATURES + 1)


@dataclass(frozen=True, eq=False)
class LagDataset:
    """Supervised samples built from a series.

    ``X_flat`` columns: the 8 current features, then for each lag ``k = 1..L``
    the 8 features and the speed at ``t - k*step``.  ``X_grid`` is derived
    from ``X_flat``: ``(n, L+1, 9, 1)`` with rows oldest-first and the
    unknown current-time speed cell set to 0.
    """

    X_flat: np.ndarray
    y: np.ndarray
    timestamps: np.ndarray
    num_lags: int

    def __post_init__(self):
        X = np.asarray(self.X_flat, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.float64)
        ts = np.asarray(self.timestamps, dtype=np.int64)
        if X.ndim != 2 or X.shape[1] != LagSpec(num_lags=self.num_lags).width:
            raise SchemaMismatch(f"X_flat shape {X.shape} does not match {self.num_lags} lags")
        if y.shape != (len(X),) or ts.shape != (len(X),):
            raise SchemaMismatch("X_flat, y and timestamps disagree in length")
        for name, arr in (("X_flat", X), ("y", y), ("timestamps", ts)):
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return len(self.y)

    @cached_property
    def X_grid(self) -> np.ndarray:
        return flat_to_grid(self.X_flat, self.num_lags)

    def take(self, start: int, stop: int) -> "LagDataset":
        return LagDataset(self.X_flat[start:stop], self.y[start:stop], self.timestamps[start:stop], self.num_lags)


def flat_to_grid(X_flat: np.ndarray, num_lags: int) -> np.ndarray:
    n = len(X_flat)
    grid = np.zeros((n, num_lags + 1, N_FEATURES + 1, 1))
    for k in range(1, num_lags + 1):
        start = N_FEATURES + (k - 1) * (N_FEATURES + 1)
        grid[:, num_lags - k, :, 0] = X_flat[:, start:start + N_FEATURES + 1]
    grid[:, num_lags, :N_FEATURES, 0] = X_flat[:, :N_FEATURES]
    return grid


def build_lag_matrix(series: TimeSeries, spec: LagSpec = LagSpec()) -> LagDataset:
    """Pair each record (after the first ``num_lags``) with its history.

    ``spec.step_minutes`` must be a multiple of the 10-minute cadence; a lag
    of ``k`` steps reaches back ``k*step_minutes`` minutes.
    """
    if spec.step_minutes % CADENCE_MINUTES:
        raise ValueError(f"step_minutes must be a multiple of {CADENCE_MINUTES}")
    stride = spec.step_minutes // CADENCE_MINUTES
    reach = spec.num_lags * stride
    n = len(series)
    if n <= reach:
        raise SeriesTooShort(f"series of {n} records cannot supply {spec.num_lags} lags of {spec.step_minutes} min")
    feats = series.features
    speed = series.target
    rows = np.arange(reach, n)
    blocks = [feats[rows]]
    for k in range(1, spec.num_lags + 1):
        src = rows - k * stride
        blocks.append(feats[src])
        blocks.append(speed[src, None])
    X = np.concatenate(blocks, axis=1)
    return LagDataset(X, speed[rows].copy(), series.timestamps[rows].copy(), spec.num_lags)


# -- scaling -------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class MinMaxScaler:
    feature_min: np.ndarray
    feature_max: np.ndarray
    target_min: float
    target_max: float

    def _scale(self, values, lo, hi):
        span = hi - lo
        safe = np.where(span > 0, span, 1.0)
        return np.where(span > 0, (values - lo) / safe, 0.0)

    def transform_features(self, X: np.ndarray) -> np.ndarray:
        return self._scale(np.asarray(X, dtype=np.float64), self.feature_min, self.feature_max)

    def scale_target(self, values) -> np.ndarray:
        return self._scale(np.asarray(values, dtype=np.float64), self.target_min, self.target_max)

    def invert_target(self, values) -> np.ndarray:
        return np.asarray(values, dtype=np.float64) * (self.target_max - self.target_min) + self.target_min

    def to_arrays(self) -> dict:
        return {
            "feature_min": self.feature_min,
            "feature_max": self.feature_max,
            "target_range": np.array([self.target_min, self.target_max]),
        }

    @classmethod
    def from_arrays(cls, arrays: dict) -> "MinMaxScaler":
        lo, hi = arrays["target_range"]
        return cls(np.asarray(arrays["feature_min"]), np.asarray(arrays["feature_max"]), float(lo), float(hi))


def fit_scaler(train: LagDataset) -> MinMaxScaler:
    """Column-wise min/max of the training rows (inputs and target)."""
    if len(train) == 0:
        raise EmptySplit("cannot fit a scaler on zero rows")
    return MinMaxScaler(
        train.X_flat.min(axis=0),
        train.X_flat.max(axis=0),
        float(train.y.min()),
        float(train.y.max()),
    )


def apply_scaler(scaler: MinMaxScaler, data: LagDataset) -> LagDataset:
    return LagDataset(
        scaler.transform_features(data.X_flat),
        scaler.scale_target(data.y),
        data.timestamps,
        data.num_lags,
    )


def invert_target(scaler: MinMaxScaler, values) -> np.ndarray:
    return scaler.invert_target(values)


# -- splitting -----------------------------------------------------------------

DEFAULT_FRACTIONS = (0.6667, 0.1667, 0.1666)


@dataclass(frozen=True)
class Splits:
    train: LagDataset
    val: LagDataset
    test: LagDataset

    def __iter__(self):
        return iter((self.train, self.val, self.test))


def split_sizes(n: int, fractions=DEFAULT_FRACTIONS) -> tuple[int, int, int]:
    if len(fractions) != 3 or any(f <= 0 for f in fractions):
        raise ValueError("fractions must be three positive numbers")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"fractions must sum to 1, got {sum(fractions)!r}")
    n_train = int(math.floor(n * fractions[0] + 0.5))
    n_val = int(math.floor(n * fractions[1] + 0.5))
    n_test = n - n_train - n_val
    if min(n_train, n_val, n_test) <= 0:
        raise EmptySplit(f"{n} samples give split sizes {n_train}/{n_val}/{n_test}")
    return n_train, n_val, n_test


def chrono_split(data: LagDataset, fractions=DEFAULT_FRACTIONS) -> Splits:
    """Contiguous train/validation/test blocks in time order; the test block absorbs rounding."""
    n_train, n_val, _ = split_sizes(len(data), fractions)
    return Splits(
        data.take(0, n_train),
        data.take(n_train, n_train + n_val),
        data.take(n_train + n_val, len(data)),
    )
