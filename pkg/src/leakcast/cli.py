"""Command-line entry point: ``leakcast {decompose,train,tune,bench,predict}``.

Every subcommand writes into a fresh ``<out>/<name>/<timestamp>/`` directory
together with the effective configuration (``config.yaml``), so a run can
be repeated from that file alone. Errors are reported on stderr as one JSON
object and mapped to exit codes 2 (config), 3 (data) and 4 (runtime).
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import bench, config, plotting
from .errors import ConfigError, DataError, LeakcastError
from .filters import apply_filter
from .forecaster import checkpoint, fit_series, predict_horizon, snap_embed_dim
from .metrics import REPORT_COLUMNS, evaluate
from .series import (FaultThreshold, downsample, fault_alarm, ingest_csv, make_windows,
                     synthetic_leakage, write_csv)
from .tpe import SearchSpace, importance, optimize, write_jsonl

log = logging.getLogger("leakcast")

SUBCOMMANDS = ("decompose", "train", "tune", "bench", "predict")


def load_series(cfg):
    ds = cfg["dataset"]
    if ds["path"] is None:
        s = synthetic_leakage(ds["synthetic_length"], seed=config.derive_seed(cfg["seed"], "dataset"),
                              dt=ds["dt"])
    else:
        s = ingest_csv(ds["path"], ds["column"], delimiter=ds["delimiter"], dt=ds["dt"], unit=ds["unit"])
    if ds["downsample"] > 1:
        if len(s) < ds["downsample"]:
            raise DataError(f"series of {len(s)} samples is shorter than the downsample factor")
        s = downsample(s, ds["downsample"], ds["method"])
    return s


def _filtered(cfg, s):
    return apply_filter(cfg["filter"]["name"], s, cfg["filter"]["params"])


def _split(values, fraction):
    cut = bench.split_point(values.size, fraction)
    return values[:cut], values[cut:]


def _window_rmse(train_values, holdout, model):
    """Forecast every window of ``holdout`` (context reaching into the training tail)."""
    k, h = model.cfg.input_size, model.cfg.horizon
    X, Y = make_windows(np.concatenate([train_values[-k:], holdout]), k, h)
    return evaluate(Y, predict_horizon(model, X))


def _out_dir(cfg, name):
    return bench.new_run_dir(cfg["out"], name)


def cmd_decompose(cfg, args):
    s = load_series(cfg)
    result = _filtered(cfg, s)
    out = _out_dir(cfg, "decompose")
    write_csv(out / "components.csv", {"time": s.times, "input": s.values, **result.columns()})
    config.dump(cfg, out / "config.yaml")
    return {"out_dir": str(out), "filter": cfg["filter"]["name"], "length": len(s)}


def cmd_train(cfg, args):
    s = load_series(cfg)
    y = _filtered(cfg, s).filtered
    train_values, test_values = _split(y, cfg["split"]["test_fraction"])
    mcfg = config.model_config(cfg)
    if test_values.size < mcfg.horizon:
        raise DataError(f"test segment of {test_values.size} samples is shorter than the horizon")
    start = time.perf_counter()
    model = fit_series(train_values, mcfg)
    wall = time.perf_counter() - start
    report = _window_rmse(train_values, test_values, model)
    out = _out_dir(cfg, "train")
    checkpoint.save(model, out / "checkpoint.json")
    bench.write_table(out / "metrics.csv", [{**dict(zip(REPORT_COLUMNS, report.row())), "wall_time": wall}])
    write_csv(out / "loss.csv", {"epoch": np.arange(1, len(model.loss_curve) + 1), "loss": model.loss_curve})
    plotting.line_chart(list(range(1, len(model.loss_curve) + 1)), {"train loss": model.loss_curve},
                        out / "plot.svg", xlabel="epoch", ylabel="loss")
    config.dump(cfg, out / "config.yaml")
    return {"out_dir": str(out), "rmse": report.rmse, "wall_time": wall}


def tune_objective(cfg, train_values):
    """Validation RMSE of a model trained on the leading part of ``train_values``."""
    fit_part, val_part = _split(train_values, cfg["tpe"]["validation_fraction"])

    def objective(params, seed):
        changes = dict(params)
        heads = changes.get("num_heads", cfg["model"]["num_heads"])
        changes["embed_dim"] = snap_embed_dim(changes.get("embed_dim", cfg["model"]["embed_dim"]), heads)
        mcfg = config.model_config(cfg, **changes, seed=seed)
        if val_part.size < mcfg.horizon:
            raise DataError("validation segment is shorter than the horizon")
        return _window_rmse(fit_part, val_part, fit_series(fit_part, mcfg)).rmse

    return objective


def cmd_tune(cfg, args):
    s = load_series(cfg)
    y = _filtered(cfg, s).filtered
    train_values, _ = _split(y, cfg["split"]["test_fraction"])
    tpe = cfg["tpe"]
    space = SearchSpace.from_dict(tpe["space"])
    best, state = optimize(tune_objective(cfg, train_values), space, tpe["n_trials"],
                           seed=config.derive_seed(cfg["seed"], "tpe"),
                           gamma_fraction=tpe["gamma_fraction"], n_startup=tpe["n_startup"],
                           n_candidates=tpe["n_candidates"],
                           callback=lambda t: log.info("trial %d: %s -> %s", t.number, t.params, t.value))
    out = _out_dir(cfg, "tune")
    write_jsonl(state.history, out / "history.jsonl")
    rows = [{"number": t.number, **t.params, "value": t.value, "status": t.status, "wall_time": t.wall_time}
            for t in state.history]
    bench.write_table(out / "trials.csv", rows)
    config.dump(cfg, out / "config.yaml")
    if best is None:
        raise LeakcastError("every tuning trial failed; see history.jsonl")
    done = [t for t in state.history if t.status == "complete"]
    plotting.scatter_chart([t.number for t in done], [t.value for t in done], out / "plot.svg",
                           xlabel="trial", ylabel="validation RMSE")
    result = {"out_dir": str(out), "best_value": best.value, "best_params": best.params}
    if len(done) >= 10:
        imp = importance(state.history, space)
        bench.write_table(out / "importance.csv", [{"parameter": k, "importance": v} for k, v in imp.items()])
        result["importance"] = imp
    tuned = {**cfg, "model": {**cfg["model"], **best.params}}
    heads = tuned["model"]["num_heads"]
    tuned["model"]["embed_dim"] = snap_embed_dim(tuned["model"]["embed_dim"], heads)
    config.dump(tuned, out / "best_config.yaml")
    return result


def cmd_bench(cfg, args):
    s = load_series(cfg)
    ecfg = config.experiment_config(cfg)
    records, rows = bench.run_experiment(s.values, ecfg)
    out = _out_dir(cfg, ecfg.experiment)
    bench.persist(out, ecfg, records, rows)
    config.dump(cfg, out / "config.yaml")
    failed = sum(r.status != "complete" for r in records)
    return {"out_dir": str(out), "records": len(records), "failed": failed}


def cmd_predict(cfg, args):
    path = args.checkpoint or cfg["predict"]["checkpoint"]
    if path is None:
        raise ConfigError("predict.checkpoint: a checkpoint path is required (or pass --checkpoint)")
    model = checkpoint.load(path)
    s = load_series(cfg)
    y = _filtered(cfg, s).filtered
    k = model.cfg.input_size
    if y.size < k:
        raise DataError(f"series of {y.size} samples is shorter than the model input size {k}")
    forecast = np.asarray(predict_horizon(model, y[-k:]), dtype=float)
    thr = FaultThreshold(float(cfg["fault"]["threshold"]))
    step = fault_alarm(forecast, thr)
    out = _out_dir(cfg, "predict")
    write_csv(out / "forecast.csv", {"step": np.arange(1, forecast.size + 1), "forecast": forecast})
    plotting.line_chart(list(range(1, forecast.size + 1)), {"forecast": forecast}, out / "plot.svg",
                        xlabel="steps ahead", ylabel=f"current ({s.unit})")
    report = {"threshold": thr.limit, "first_crossing_index": step,
              "first_crossing_step": None if step is None else step + 1,
              "forecast": forecast.tolist(), "checkpoint": str(path)}
    (out / "report.json").write_text(json.dumps(report, indent=2))
    config.dump(cfg, out / "config.yaml")
    return {"out_dir": str(out), "first_crossing_step": report["first_crossing_step"]}


COMMANDS = {"decompose": cmd_decompose, "train": cmd_train, "tune": cmd_tune,
            "bench": cmd_bench, "predict": cmd_predict}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML configuration file")
    common.add_argument("--seed", type=int, help="root seed (overrides the config)")
    common.add_argument("--out", help="output directory (overrides config and environment)")
    common.add_argument("--threads", type=int, help="worker processes for independent runs")
    common.add_argument("--quiet", action="store_true", help="suppress progress and summary output")
    parser = argparse.ArgumentParser(prog="leakcast", description="Leakage-current forecasting toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "decompose": "filter a series and write its components",
        "train": "fit one model and write a checkpoint and test metrics",
        "tune": "TPE hyperparameter study",
        "bench": "run one benchmark experiment",
        "predict": "forecast from a checkpoint and report the first fault-threshold crossing",
    }
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, parents=[common], help=helps[name])
        if name == "predict":
            p.add_argument("--checkpoint", help="checkpoint file written by 'train'")
    return parser


def _error_report(exc, code):
    doc = {"status": "error", "exit_code": code, "error": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, ConfigError):
        doc["violations"] = exc.violations
    return json.dumps(doc)


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        if args.seed is not None and args.seed < 0:
            raise ConfigError("--seed: must be non-negative")
        cfg = config.load(args.config, {"seed": args.seed, "out": args.out, "threads": args.threads})
        result = COMMANDS[args.command](cfg, args)
    except LeakcastError as exc:
        print(_error_report(exc, exc.exit_code), file=sys.stderr)
        return exc.exit_code
    except Exception as exc:  # noqa: BLE001 - last-resort runtime failure
        print(_error_report(exc, 4), file=sys.stderr)
        return 4
    if not args.quiet:
        print(json.dumps({"status": "ok", "command": args.command, **_jsonable(result)}))
    return 0


def _jsonable(d):
    out = {}
    for k, v in d.items():
        if isinstance(v, float) and not math.isfinite(v):
            v = None
        out[k] = v
    return out


if __name__ == "__main__":
    sys.exit(main())
