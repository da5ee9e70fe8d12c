"""Acceptance criteria, one test per criterion, each printing a PASS/FAIL line.

The default-scale checks (width contract, sparsity, ten-run protocol,
baseline) fit the full default configuration on the one-year synthetic
set and take most of an hour on a single core.
"""

import math
import time

import numpy as np
import pytest

from jetcast import cli
from jetcast.config import RunConfig, from_ini, to_ini
from jetcast.data import (
    LagSpec,
    SynthConfig,
    build_lag_matrix,
    chrono_split,
    split_sizes,
    synth_generate,
)
from jetcast.experiment import AGGREGATE_LABEL, BASELINE, available_cpus, run_experiment
from jetcast.metrics import ErrorStats
from jetcast.pipeline import SEED_OFFSETS, STAGES, JetConfig, body_encode, fit_pipeline
from jetcast.regressors import train_tail

from conftest import random_series

TEN_RUN_BUDGET_S = 900.0

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


# -- fast criteria -----------------------------------------------------------------------

def test_gradient_fidelity(verdict, capsys):
    t0 = time.perf_counter()
    code = cli.main(["gradcheck"])
    elapsed = time.perf_counter() - t0
    lines = [l for l in capsys.readouterr().out.splitlines() if l.startswith(("PASS", "FAIL"))]
    worst = max(float(l.split("max_rel_error=")[1].split()[0]) for l in lines)
    ok = code == cli.EXIT_OK and len(lines) >= 6 and worst < 1e-4 and elapsed < 60
    verdict("gradient fidelity", ok, f"{len(lines)} cases, max rel err {worst:.2e}, {elapsed:.1f}s")
    assert ok


def _brute(actual, predicted):
    e = [a - p for a, p in zip(actual, predicted)]
    m = len(e)
    mu = sum(e) / m
    return (math.sqrt(sum(x * x for x in e) / m), sum(abs(x) for x in e) / m,
            math.sqrt(sum((x - mu) ** 2 for x in e) / m))


def test_metric_oracles(verdict):
    rng = np.random.default_rng(7)
    worst, worst_dec = 0.0, 0.0
    for _ in range(1000):
        m = int(rng.integers(1, 80))
        a = rng.normal(8.0, 3.0, m)
        p = a + rng.normal(rng.normal(), rng.uniform(0.01, 2.0), m)
        st = ErrorStats.of(a, p)
        ref = _brute(a.tolist(), p.tolist())
        worst = max(worst, abs(st.rmse - ref[0]), abs(st.mae - ref[1]), abs(st.sde - ref[2]))
        worst_dec = max(worst_dec, abs(st.rmse ** 2 - (st.bias ** 2 + st.sde ** 2)))
    ok = worst <= 1e-12 and worst_dec <= 1e-9
    verdict("metric oracles", ok, f"max |diff| {worst:.1e}, decomposition {worst_dec:.1e}")
    assert ok


def _lag_cells(series, num_lags):
    f, y = series.features, series.target
    out = []
    for t in range(num_lags, len(series)):
        row = list(f[t])
        for k in range(1, num_lags + 1):
            row += list(f[t - k]) + [y[t - k]]
        out.append(row)
    return np.array(out)


def test_lag_lattice_oracle(verdict):
    rng = np.random.default_rng(8)
    mismatched = 0
    for _ in range(100):
        s = random_series(rng, int(rng.integers(8, 60)), start=int(rng.integers(0, 10_000)) * 10)
        d = build_lag_matrix(s, LagSpec())
        ref = _lag_cells(s, 7)
        mismatched += not (d.X_flat.shape == ref.shape and np.array_equal(d.X_flat, ref)
                           and np.array_equal(d.y, s.target[7:]))
    width = build_lag_matrix(random_series(rng, 8), LagSpec()).X_flat.shape[1]
    ok = mismatched == 0 and width == 71
    verdict("lag-lattice oracle", ok, f"{100 - mismatched}/100 series match, width {width}")
    assert ok


def test_split_fidelity(verdict):
    s = random_series(np.random.default_rng(9), 1207)
    d = build_lag_matrix(s, LagSpec())
    sp = chrono_split(d, (0.6667, 0.1667, 0.1666))
    sizes = tuple(len(x) for x in sp)
    joined = np.concatenate([x.timestamps for x in sp])
    ordered = all(np.all(np.diff(x.timestamps) > 0) for x in sp)
    disjoint = sp.train.timestamps[-1] < sp.val.timestamps[0] and sp.val.timestamps[-1] < sp.test.timestamps[0]
    ok = (len(d) == 1200 and sizes == (800, 200, 200) == split_sizes(1200, (0.6667, 0.1667, 0.1666))
          and np.array_equal(joined, d.timestamps) and ordered and disjoint)
    verdict("split fidelity", ok, f"sizes {sizes}")
    assert ok


def test_config_fidelity(verdict):
    cfg = RunConfig()
    m = cfg.model
    rows = [(r.neurons, r.max_epoch, r.l2_weight_regularization, r.sparsity_regularization, r.sparsity_proportion)
            for r in m.tail.layers]
    wings_ok = ((m.wing1.number_of_layers, m.wing2.number_of_layers) == (10, 12)
              and (m.wing1.number_of_epochs, m.wing2.number_of_epochs) == (5, 50)
              and m.wing1.initial_learning_rate == m.wing2.initial_learning_rate == 0.001)
    round_trip = from_ini(to_ini(cfg)) == cfg and to_ini(from_ini(to_ini(cfg))) == to_ini(cfg)
    ok = wings_ok and rows == TAIL_ROWS and round_trip
    verdict("config fidelity", ok, f"wings {wings_ok}, tail rows {rows == TAIL_ROWS}, round trip {round_trip}")
    assert ok


# -- default-scale criteria -------------------------------------------------------------------

@pytest.fixture(scope="module")
def year():
    return synth_generate(SynthConfig())


@pytest.fixture(scope="module")
def default_fit(year):
    splits = chrono_split(build_lag_matrix(year, LagSpec()))
    return splits, fit_pipeline(splits.train, splits.val, JetConfig(), seed=0)


@pytest.mark.slow
def test_width_contract(verdict, default_fit):
    splits, pipe = default_fit
    body_out = body_encode(pipe.body, pipe.concat_features(pipe.scale(splits.test))).shape[1]
    w = pipe.widths
    ok = (w["concat"], w["body"], w["nose_input"]) == (397, 200, 271) and body_out == 200
    verdict("width contract", ok, f"concat {w['concat']}, body {w['body']} (measured {body_out}), "
                                  f"nose input {w['nose_input']}")
    assert ok


@pytest.mark.slow
def test_sparsity_behavior(verdict, default_fit):
    splits, pipe = default_fit
    tr = pipe.scale(splits.train)
    control = train_tail(pipe.config.tail.without_sparsity(), tr, pipe.seed + SEED_OFFSETS["tail"], probe=None)
    details, ok = [], True
    for k, (row, sparse, plain) in enumerate(zip(pipe.config.tail.layers, pipe.tail.codes(tr.X_flat),
                                                 control.codes(tr.X_flat)), start=1):
        gap_sparse = abs(sparse.mean() - row.sparsity_proportion)
        gap_plain = abs(plain.mean() - row.sparsity_proportion)
        ok &= gap_sparse < gap_plain
        details.append(f"L{k} {sparse.mean():.4f}/{plain.mean():.4f}")
    verdict("sparsity behavior", ok, "mean activation sparse/control: " + ", ".join(details))
    assert ok


@pytest.fixture(scope="module")
def ten_runs(year):
    t0 = time.perf_counter()
    first = run_experiment(year, n_runs=10, base_seed=0, baseline=True)
    elapsed = time.perf_counter() - t0
    second = run_experiment(year, n_runs=10, base_seed=0, baseline=True)
    print("\n" + first.report.tables())
    return first, second, elapsed


@pytest.mark.slow
def test_ten_run_budget(verdict, ten_runs):
    _, _, elapsed = ten_runs
    ok = elapsed < TEN_RUN_BUDGET_S
    verdict("ten-run protocol: wall clock", ok,
            f"{elapsed:.0f}s for 10 runs (budget {TEN_RUN_BUDGET_S:.0f}s) on {available_cpus()} CPU(s)")
    assert ok


@pytest.mark.slow
def test_ten_run_report_shape(verdict, ten_runs):
    first, _, _ = ten_runs
    lines = first.report.to_csv().splitlines()[1:]
    per_stage = {s: [l.split(",")[0] for l in lines if l.split(",")[1] == s] for s in STAGES}
    ok = (all(v == [str(k) for k in range(1, 11)] + [AGGREGATE_LABEL] for v in per_stage.values())
          and all(len(l.split(",")) == 5 for l in lines)
          and first.report.tables().count("±") == 3 * len(first.report.stages))
    verdict("ten-run protocol: report shape", ok, "10 runs x 5 stages x 3 metrics + mean±std row")
    assert ok


@pytest.mark.slow
def test_ten_run_ordering(verdict, ten_runs):
    first, _, _ = ten_runs
    agg = first.report.aggregate()
    nose = agg["nose"]["rmse"].mean
    rivals = {s: agg[s]["rmse"].mean for s in ("wing1", "wing2", "tail")}
    ok = all(nose < v for v in rivals.values())
    verdict("ten-run protocol: ordering", ok,
            f"mean RMSE nose {nose:.4f} vs " + ", ".join(f"{s} {v:.4f}" for s, v in rivals.items()))
    assert ok


@pytest.mark.slow
def test_ten_run_reproducible(verdict, ten_runs):
    first, second, _ = ten_runs
    ok = first.report.to_csv() == second.report.to_csv() and np.array_equal(first.plot_predicted,
                                                                             second.plot_predicted)
    verdict("ten-run protocol: seeded rerun bit-exact", ok)
    assert ok


@pytest.mark.slow
def test_baseline_analogue(verdict, ten_runs):
    first, second, _ = ten_runs
    col = first.report.column(BASELINE, "rmse")
    same = first.report.column(BASELINE, "rmse") == second.report.column(BASELINE, "rmse")
    ok = BASELINE in first.report.stages and len(col) == 10 and all(np.isfinite(col)) and same
    verdict("baseline analogue", ok, f"mean RMSE {np.mean(col):.4f}, reproducible {same}")
    assert ok
