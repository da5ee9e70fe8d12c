"""``jetcast`` command-line front end.

Exit status: 0 success, 1 unexpected internal error, 2 usage error,
3 data/config/model-file error, 4 gradient check failed.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import sys
import time
from pathlib import Path

from . import __version__
from .config import RunConfig, load_config, to_ini
from .container import atomic_write_text
from .data import LagDataset, LagSpec, TimeSeries, build_lag_matrix, chrono_split, load_csv, synth_generate, write_csv
from .errors import JetcastError
from .experiment import run_experiment
from .nn.gradcheck import default_cases, run_cases
from .pipeline import fit_pipeline, load_pipeline, predict, save_pipeline

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_CHECK_FAILED = 4

PIPELINE_FILE = "pipeline.jcp"
TRAIN_LOG = "train_log.json"
REPORT_CSV = "report.csv"
REPORT_TXT = "report.txt"
PLOT_CSV = "plot.csv"


def _config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    data, exp = cfg.data, cfg.experiment
    if getattr(args, "data", None):
        data = dataclasses.replace(data, csv=args.data)
    if getattr(args, "seed", None) is not None:
        exp = dataclasses.replace(exp, base_seed=args.seed)
    if getattr(args, "runs", None) is not None:
        exp = dataclasses.replace(exp, n_runs=args.runs)
    if getattr(args, "jobs", None) is not None:
        exp = dataclasses.replace(exp, n_jobs=args.jobs)
    if getattr(args, "baseline", False):
        exp = dataclasses.replace(exp, baseline=True)
    return dataclasses.replace(cfg, data=data, experiment=exp)


def _series(cfg: RunConfig) -> TimeSeries:
    return load_csv(cfg.data.csv) if cfg.data.csv else synth_generate(cfg.data.synth)


def _log(msg: str) -> None:
    print(msg, file=sys.stderr, flush=True)


def cmd_synth(args) -> int:
    cfg = _config(args)
    synth = cfg.data.synth
    synth = dataclasses.replace(
        synth,
        length=synth.length if args.length is None else args.length,
        seed=synth.seed if args.seed is None else args.seed,
        noise_std=synth.noise_std if args.noise_std is None else args.noise_std,
    )
    series = synth_generate(synth)
    write_csv(series, args.out)
    _log(f"wrote {len(series)} rows to {args.out}")
    return EXIT_OK


def cmd_config(args) -> int:
    sys.stdout.write(to_ini(_config(args)))
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _config(args)
    splits = chrono_split(build_lag_matrix(_series(cfg), cfg.data.lag), cfg.data.fractions)
    seed = cfg.experiment.base_seed
    t0 = time.perf_counter()
    pipe = fit_pipeline(splits.train, splits.val, cfg.model, seed)
    _log(f"fitted pipeline (seed {seed}) in {time.perf_counter() - t0:.1f}s")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_pipeline(pipe, out / PIPELINE_FILE)
    log = {
        "seed": seed,
        "rows": {"train": len(splits.train), "val": len(splits.val), "test": len(splits.test)},
        "widths": pipe.widths,
        "val_rmse": pipe.val_rmse,
        "wing_val_rmse_per_epoch": {"wing1": pipe.wing1.val_rmse, "wing2": pipe.wing2.val_rmse},
    }
    atomic_write_text(out / TRAIN_LOG, json.dumps(log, indent=2, sort_keys=True) + "\n")
    for stage, value in pipe.val_rmse.items():
        print(f"{stage}\tval_rmse\t{value:.6f}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = _config(args)
    exp = cfg.experiment
    t0 = time.perf_counter()
    result = run_experiment(_series(cfg), cfg.model, exp.n_runs, exp.base_seed, cfg.data.lag, cfg.data.fractions,
                            baseline=exp.baseline, n_jobs=exp.n_jobs or None)
    _log(f"{exp.n_runs} runs in {time.perf_counter() - t0:.1f}s")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    atomic_write_text(out / REPORT_CSV, result.report.to_csv())
    atomic_write_text(out / REPORT_TXT, result.report.tables())
    atomic_write_text(out / PLOT_CSV, result.plot_csv())
    sys.stdout.write(result.report.tables())
    return EXIT_OK


def predictions_csv(rows: LagDataset, preds) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["timestamp", "prediction"])
    for t, p in zip(rows.timestamps, preds):
        w.writerow([int(t), repr(float(p))])
    return buf.getvalue()


def cmd_predict(args) -> int:
    pipe = load_pipeline(args.pipeline)
    series = load_csv(args.csv)
    rows = build_lag_matrix(series, LagSpec(num_lags=pipe.num_lags))
    text = predictions_csv(rows, predict(pipe, rows))
    if args.out:
        atomic_write_text(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    seed = 0 if args.seed is None else args.seed
    results = run_cases(default_cases(seed))
    failed = 0
    for name, res in results:
        ok = res.passed(args.tol)
        failed += not ok
        print(f"{'PASS' if ok else 'FAIL'}\t{name}\tmax_rel_error={res.max_rel_error:.3e}\tparams={res.n_params}")
    print(f"{len(results) - failed}/{len(results)} cases below {args.tol:g}")
    return EXIT_OK if failed == 0 else EXIT_CHECK_FAILED


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="jetcast", description="Deep ensemble wind-speed forecaster.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, runs=False):
        sp.add_argument("--config", help="INI run configuration")
        sp.add_argument("--seed", type=int, help="base seed (overrides [experiment] base_seed)")
        sp.add_argument("--data", help="input CSV (overrides [data] csv; default is synthetic data)")
        if runs:
            sp.add_argument("--runs", type=int, help="number of seeded runs")
            sp.add_argument("--jobs", type=int, help="worker processes for independent runs")
            sp.add_argument("--baseline", action="store_true", help="also evaluate a raw-feature MLP")

    sp = sub.add_parser("synth", help="write a synthetic met-mast CSV")
    sp.add_argument("--config")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--length", type=int, help="number of 10-minute records")
    sp.add_argument("--noise-std", type=float)
    sp.add_argument("--out", required=True, help="output CSV path")
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("config", help="print the effective configuration")
    common(sp, runs=True)
    sp.set_defaults(func=cmd_config)

    sp = sub.add_parser("train", help="fit one pipeline and save it")
    common(sp)
    sp.add_argument("--out", required=True, help="output directory")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("evaluate", help="seeded multi-run evaluation report")
    common(sp, runs=True)
    sp.add_argument("--out", required=True, help="output directory")
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("predict", help="forecast with a saved pipeline")
    sp.add_argument("pipeline", help="pipeline container written by 'train'")
    sp.add_argument("csv", help="input CSV")
    sp.add_argument("--out", help="output CSV (default stdout)")
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("gradcheck", help="finite-difference gradient checks")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--tol", type=float, default=1e-4)
    sp.set_defaults(func=cmd_gradcheck)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        return args.func(args)
    except (JetcastError, ValueError, OSError) as exc:
        print(f"jetcast: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except KeyboardInterrupt:
        return 130
    except Exception as exc:  # noqa: BLE001
        print(f"jetcast: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


def main_exit() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
