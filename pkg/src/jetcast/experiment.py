"""Repeated-seed evaluation protocol and its table-shaped report."""

from __future__ import annotations

import csv
import io
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from threadpoolctl import threadpool_limits

from .data import DEFAULT_FRACTIONS, LagSpec, TimeSeries, apply_scaler, build_lag_matrix, chrono_split, fit_scaler
from .errors import EmptyList
from .metrics import METRICS, ErrorStats, MeanStd, aggregate_runs
from .pipeline import SEED_OFFSETS, STAGES, JetConfig, fit_pipeline
from .nn import train
from .regressors import build_mlp

BASELINE = "baseline"
AGGREGATE_LABEL = "mean±std"
STAGE_TITLES = {
    "wing1": "Wing1 (CNN1)",
    "wing2": "Wing2 (CNN2)",
    "tail": "Tail (Auto-encoder)",
    "body": "Body (Nonlinear PCA)",
    "nose": "Nose (MLP)",
    BASELINE: "Baseline (MLP)",
}


@dataclass
class ExperimentReport:
    """Per-run, per-stage test errors (m/s).  ``runs[r][stage]`` is an ErrorStats."""

    stages: tuple[str, ...]
    runs: list[dict[str, ErrorStats]]
    seeds: list[int] = field(default_factory=list)

    def __post_init__(self):
        if not self.runs:
            raise EmptyList("a report needs at least one run")

    def column(self, stage: str, metric: str) -> list[float]:
        return [getattr(run[stage], metric) for run in self.runs]

    def aggregate(self) -> dict[str, dict[str, MeanStd]]:
        return {s: aggregate_runs([run[s] for run in self.runs]) for s in self.stages}

    def to_csv(self) -> str:
        """``run,stage,rmse,mae,sde`` rows; floats are written with ``repr`` so they reload exactly."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["run", "stage", *METRICS])
        agg = self.aggregate()
        for stage in self.stages:
            for r, run in enumerate(self.runs, start=1):
                w.writerow([r, stage, *(repr(getattr(run[stage], m)) for m in METRICS)])
            w.writerow([AGGREGATE_LABEL, stage, *(f"{agg[stage][m].mean!r}±{agg[stage][m].std!r}" for m in METRICS)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "ExperimentReport":
        rows = list(csv.DictReader(io.StringIO(text)))
        stages, runs = [], {}
        for row in rows:
            if row["run"] == AGGREGATE_LABEL:
                continue
            stage = row["stage"]
            if stage not in stages:
                stages.append(stage)
            vals = {m: float(row[m]) for m in METRICS}
            rmse, mae, sde = vals["rmse"], vals["mae"], vals["sde"]
            # bias magnitude is recoverable from rmse^2 = bias^2 + sde^2; its sign is not stored
            runs.setdefault(int(row["run"]), {})[stage] = ErrorStats(rmse, mae, sde, float(np.sqrt(max(rmse**2 - sde**2, 0.0))))
        return cls(tuple(stages), [runs[k] for k in sorted(runs)])

    def tables(self, digits: int = 4) -> str:
        """One text table per metric: run rows, stage columns, a ``mean±std`` footer."""
        agg = self.aggregate()
        out = []
        for metric in METRICS:
            header = ["", *(STAGE_TITLES.get(s, s) for s in self.stages)]
            lines = [f"{metric.upper()}", "\t".join(header)]
            for r, run in enumerate(self.runs, start=1):
                lines.append("\t".join([f"{r}.", *(f"{getattr(run[s], metric):.{digits}f}" for s in self.stages)]))
            lines.append("\t".join(["", *(agg[s][metric].format(digits + 1) for s in self.stages)]))
            out.append("\n".join(lines))
        return "\n\n".join(out) + "\n"


@dataclass
class ExperimentResult:
    report: ExperimentReport
    plot_timestamps: np.ndarray
    plot_actual: np.ndarray
    plot_predicted: np.ndarray
    timings: list[dict[str, float]] = field(default_factory=list)

    def plot_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["timestamp", "actual", "predicted"])
        for t, a, p in zip(self.plot_timestamps, self.plot_actual, self.plot_predicted):
            w.writerow([int(t), repr(float(a)), repr(float(p))])
        return buf.getvalue()


def fit_baseline(train_rows, seed: int, config: JetConfig):
    """MLP with the nose's width and schedule on the scaled raw lag features only."""
    scaler = fit_scaler(train_rows)
    tr = apply_scaler(scaler, train_rows)
    net = build_mlp(tr.X_flat.shape[1], config.nose.hidden, seed)
    train(net, tr.X_flat, tr.y[:, None], config.nose.optimizer, seed)
    return scaler, net


def _one_run(args):
    # one BLAS thread per run: identical arithmetic whether runs are serial or spread over processes
    with threadpool_limits(limits=1):
        return _score_run(*args)


def _score_run(splits, config, seed, baseline):
    train_rows, val_rows, test_rows = splits
    t0 = time.perf_counter()
    pipe = fit_pipeline(train_rows, val_rows, config, seed, body_probe=True)
    t1 = time.perf_counter()
    preds = pipe.stage_predictions(test_rows)
    stats = {s: ErrorStats.of(test_rows.y, preds[s]) for s in STAGES}
    timing = {"fit": t1 - t0}
    if baseline:
        scaler, net = fit_baseline(train_rows, seed + SEED_OFFSETS["baseline"], config)
        pred = scaler.invert_target(net.predict(scaler.transform_features(test_rows.X_flat))[:, 0])
        stats[BASELINE] = ErrorStats.of(test_rows.y, pred)
        timing["baseline"] = time.perf_counter() - t1
    return stats, preds["nose"], timing


def available_cpus() -> int:
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:
        return os.cpu_count() or 1


def run_experiment(
    data: TimeSeries,
    config: JetConfig = JetConfig(),
    n_runs: int = 10,
    base_seed: int = 0,
    lag: LagSpec = LagSpec(),
    fractions=DEFAULT_FRACTIONS,
    baseline: bool = False,
    n_jobs: int | None = None,
) -> ExperimentResult:
    """Fit and score the ensemble ``n_runs`` times with seeds ``base_seed + r``.

    The chronological split is the same for every run; only the seeds
    change.  Runs are independent and go to up to ``n_jobs`` worker
    processes (``None``: one per available CPU); results are keyed by run
    index and bit-identical to a serial run.
    """
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    splits = chrono_split(build_lag_matrix(data, lag), fractions)
    seeds = [base_seed + r for r in range(n_runs)]
    jobs = [(tuple(splits), config, s, baseline) for s in seeds]
    workers = min(n_runs, n_jobs or available_cpus())
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_one_run, jobs))
    else:
        results = [_one_run(j) for j in jobs]
    stages = STAGES + ((BASELINE,) if baseline else ())
    report = ExperimentReport(stages, [r[0] for r in results], seeds)
    test = splits.test
    return ExperimentResult(report, test.timestamps, test.y, results[-1][1], [r[2] for r in results])
