"""Forecast error measures: RMSE, MAE, SDE and their run-level aggregation.

Errors are signed, ``actual - predicted``.  SDE is the population standard
deviation of those signed errors, which gives the identity
``rmse**2 == bias**2 + sde**2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyList, EmptySeries, LengthMismatch


def _errors(actual, predicted) -> np.ndarray:
    a = np.asarray(actual, dtype=np.float64).ravel()
    p = np.asarray(predicted, dtype=np.float64).ravel()
    if a.shape != p.shape:
        raise LengthMismatch(f"{a.size} actual values vs {p.size} predictions")
    if a.size == 0:
        raise EmptySeries("need at least one prediction")
    return a - p


def rmse(actual, predicted) -> float:
    e = _errors(actual, predicted)
    return math.sqrt(float(np.mean(e * e)))


def mae(actual, predicted) -> float:
    return float(np.mean(np.abs(_errors(actual, predicted))))


def bias(actual, predicted) -> float:
    return float(np.mean(_errors(actual, predicted)))


def sde(actual, predicted) -> float:
    e = _errors(actual, predicted)
    d = e - e.mean()
    return math.sqrt(float(np.mean(d * d)))


@dataclass(frozen=True)
class ErrorStats:
    rmse: float
    mae: float
    sde: float
    bias: float

    @classmethod
    def of(cls, actual, predicted) -> "ErrorStats":
        return cls(rmse(actual, predicted), mae(actual, predicted), sde(actual, predicted), bias(actual, predicted))


METRICS = ("rmse", "mae", "sde")


@dataclass(frozen=True)
class MeanStd:
    mean: float
    std: float

    def format(self, mean_digits: int = 5, std_digits: int | None = None) -> str:
        return format_mean_std(self.mean, self.std, mean_digits, std_digits)


def mean_std(values) -> MeanStd:
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise EmptyList("no values to aggregate")
    m = float(v.mean())
    return MeanStd(m, math.sqrt(float(np.mean((v - m) ** 2))))


def aggregate_runs(per_run) -> dict[str, MeanStd]:
    """Mean and population std of each metric across runs."""
    per_run = list(per_run)
    if not per_run:
        raise EmptyList("no runs to aggregate")
    return {name: mean_std([getattr(s, name) for s in per_run]) for name in METRICS + ("bias",)}


def format_mean_std(mean: float, std: float, mean_digits: int = 5, std_digits: int | None = None) -> str:
    """``0.02465±0.00073`` style cell; ``std_digits`` defaults to ``mean_digits``."""
    if std_digits is None:
        std_digits = mean_digits
    return f"{mean:.{mean_digits}f}±{std:.{std_digits}f}"
