"""Experiment harness: filter comparison, horizon sweep, repeated-seed
statistics and baseline comparison.

Every run is a pure function of ``(series, experiment config, filter,
method, horizon, seed)`` so any row can be regenerated from its record.
Wall times are measured around the run and are the only non-reproducible
field.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
from scipy.stats import wilcoxon

from . import plotting
from .filters import FILTER_NAMES, apply_filter
from .forecaster import ModelConfig, ar_forecast, fit_ar, fit_series, predict_horizon
from .metrics import REPORT_COLUMNS, SUMMARY_FIELDS, MetricsReport, evaluate, summarize
from .series import make_windows

log = logging.getLogger(__name__)

EXPERIMENTS = ("filters", "horizons", "stats", "baselines")
METHODS = ("model", "naive", "ar")
RECORD_COLUMNS = ("experiment", "filter", "method", "horizon", "seed", *REPORT_COLUMNS,
                  "wall_time", "status", "error")


@dataclass(frozen=True)
class ExperimentConfig:
    """Settings shared by the four experiments.

    ``model`` holds ModelConfig fields other than ``horizon`` and ``seed``,
    which every run sets itself. ``eval_windows`` is the number of test
    windows drawn at random per run (None keeps all of them).
    """

    experiment: str = "filters"
    filters: tuple = ("original",) + FILTER_NAMES
    filter_params: dict = field(default_factory=dict)
    filter: str = "ewt"
    model: dict = field(default_factory=dict)
    horizons: tuple = tuple(range(5, 61, 5))
    step: int = 5
    n_runs: int = 10
    seed_base: int = 0
    fixed_seed: bool = False
    test_fraction: float = 0.2
    eval_windows: int | None = 64
    target: str = "filtered"
    methods: tuple = METHODS
    ar_order: int = 2
    workers: int = 1

    def __post_init__(self):
        problems = []
        if self.experiment not in EXPERIMENTS:
            problems.append(f"experiment must be one of {EXPERIMENTS}")
        hs = list(self.horizons)
        if not hs:
            problems.append("horizons must be non-empty")
        elif any(b <= a for a, b in zip(hs, hs[1:])) or hs[0] < 1:
            problems.append("horizons must be positive and strictly increasing")
        if self.n_runs < 1:
            problems.append("n_runs must be at least 1")
        if self.step < 1:
            problems.append("step must be at least 1")
        if not 0 < self.test_fraction < 1:
            problems.append("test_fraction must lie in (0, 1)")
        if self.eval_windows is not None and self.eval_windows < 1:
            problems.append("eval_windows must be positive or null")
        if self.target not in ("filtered", "raw"):
            problems.append("target must be 'filtered' or 'raw'")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            problems.append(f"unknown methods {bad}")
        if self.workers < 1:
            problems.append("workers must be at least 1")
        if problems:
            raise ValueError("; ".join(problems))

    def seeds(self):
        if self.fixed_seed:
            return [self.seed_base] * self.n_runs
        return [self.seed_base + i for i in range(self.n_runs)]

    def model_config(self, horizon, seed):
        return ModelConfig(**{**self.model, "horizon": int(horizon), "seed": int(seed)})

    def input_size(self):
        return self.model_config(1, 0).input_size


@dataclass(frozen=True)
class RunRecord:
    experiment: str
    filter: str
    method: str
    horizon: int
    seed: int
    metrics: MetricsReport | None
    wall_time: float
    status: str = "complete"
    error: str | None = None

    def __post_init__(self):
        if self.wall_time is None or not self.wall_time >= 0:
            raise ValueError("a run record needs a measured, non-negative wall time")

    @property
    def key(self):
        return (self.experiment, self.filter, self.method, self.horizon, self.seed)

    def as_dict(self):
        d = {k: getattr(self, k) for k in ("experiment", "filter", "method", "horizon", "seed")}
        m = self.metrics
        for c in REPORT_COLUMNS:
            d[c] = None if m is None else getattr(m, c)
        d.update(wall_time=self.wall_time, status=self.status, error=self.error)
        return d

    @classmethod
    def from_dict(cls, d):
        m = None if d.get("rmse") is None else MetricsReport(*(d[c] for c in REPORT_COLUMNS))
        return cls(d["experiment"], d["filter"], d["method"], int(d["horizon"]), int(d["seed"]),
                   m, float(d["wall_time"]), d["status"], d["error"])


def comparable(record):
    """Record contents without the wall time, for bit-for-bit comparisons."""
    d = record.as_dict() if isinstance(record, RunRecord) else dict(record)
    d.pop("wall_time", None)
    return d


def split_point(n, test_fraction):
    return n - math.floor(n * test_fraction)


def eval_windows(inputs, targets, cfg, horizon, seed):
    """Test windows (stride 1, first input reaching back into the training
    tail) and a seeded random subset of them of size ``cfg.eval_windows``."""
    k = cfg.input_size()
    cut = split_point(inputs.size, cfg.test_fraction)
    if inputs.size - cut < horizon:
        raise ValueError(f"test segment of {inputs.size - cut} samples is shorter than horizon {horizon}")
    if cut < k + horizon:
        raise ValueError(f"training segment of {cut} samples cannot hold one window")
    X, _ = make_windows(inputs[cut - k :], k, horizon)
    _, Y = make_windows(targets[cut - k :], k, horizon)
    if cfg.eval_windows is not None and cfg.eval_windows < len(X):
        rng = np.random.default_rng([seed, horizon])
        pick = np.sort(rng.choice(len(X), cfg.eval_windows, replace=False))
        X, Y = X[pick], Y[pick]
    return X, Y


def forecast_windows(train_values, X, method, horizon, seed, cfg):
    """Forecasts of shape (windows, horizon) for every input row of ``X``."""
    if method == "naive":
        return np.repeat(X[:, -1:], horizon, axis=1)
    if method == "ar":
        coef = fit_ar(train_values, cfg.ar_order, strict=False)
        return np.stack([ar_forecast(coef, row, horizon) for row in X])
    model = fit_series(train_values, cfg.model_config(horizon, seed))
    return np.atleast_2d(predict_horizon(model, X))


def prepare(values, cfg, filter_name):
    """(model input, evaluation target) series for one filter."""
    params = cfg.filter_params.get(filter_name)
    filtered = apply_filter(filter_name, values, params).filtered
    target = filtered if cfg.target == "filtered" else np.asarray(values, dtype=float)
    return filtered, target


def predictions(inputs, targets, cfg, method, horizon, seed):
    """(forecast, actual) arrays for one run; the training segment never sees test data."""
    X, Y = eval_windows(inputs, targets, cfg, horizon, seed)
    cut = split_point(inputs.size, cfg.test_fraction)
    return forecast_windows(inputs[:cut], X, method, horizon, seed, cfg), Y


def _run(task):
    experiment, filter_name, method, horizon, seed, inputs, targets, cfg = task
    start = time.perf_counter()
    try:
        pred, actual = predictions(inputs, targets, cfg, method, horizon, seed)
        report = evaluate(actual, pred)
        status, error = "complete", None
    except Exception as exc:  # noqa: BLE001 - isolate per-run failures
        report, status, error = None, "failed", f"{type(exc).__name__}: {exc}"
    return RunRecord(experiment, filter_name, method, int(horizon), int(seed), report,
                     time.perf_counter() - start, status, error)


def _failed(experiment, filter_name, method, horizon, seed, exc, elapsed):
    return RunRecord(experiment, filter_name, method, int(horizon), int(seed), None, elapsed,
                     "failed", f"{type(exc).__name__}: {exc}")


def _execute(tasks, workers):
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run, tasks))
    else:
        records = [_run(t) for t in tasks]
    return sorted(records, key=lambda r: r.key)


def _filtered_inputs(values, cfg, names, experiment, method, horizon):
    """Filter outputs per name; failures become failed records for every seed."""
    out, failed = {}, []
    for name in names:
        start = time.perf_counter()
        try:
            out[name] = prepare(values, cfg, name)
        except Exception as exc:  # noqa: BLE001
            log.warning("filter %s failed: %s", name, exc)
            failed += [_failed(experiment, name, method, horizon, s, exc, time.perf_counter() - start)
                       for s in cfg.seeds()]
    return out, failed


def rerun(record, values, cfg):
    """Regenerate one record from the series and experiment settings."""
    inputs, targets = prepare(np.asarray(values, dtype=float), cfg, record.filter)
    return _run((record.experiment, record.filter, record.method, record.horizon, record.seed,
                 inputs, targets, cfg))


def filter_comparison(values, cfg):
    """Identical model on the unfiltered series and on each filter output, at ``cfg.horizons[-1]``."""
    values = np.asarray(values, dtype=float)
    names = list(dict.fromkeys(["original", *cfg.filters]))
    h = cfg.horizons[-1]
    data, records = _filtered_inputs(values, cfg, names, "filters", "model", h)
    tasks = [("filters", n, "model", h, s, *data[n], cfg) for n in names if n in data for s in cfg.seeds()]
    return sorted(records + _execute(tasks, cfg.workers), key=lambda r: r.key)


def horizon_sweep(values, cfg, method="model"):
    """One seeded training and evaluation per horizon and seed; infeasible horizons are skipped."""
    values = np.asarray(values, dtype=float)
    inputs, targets = prepare(values, cfg, cfg.filter)
    limit = values.size // 4
    tasks = []
    for h in cfg.horizons:
        if h > limit:
            log.warning("horizon %d exceeds a quarter of the series (%d); skipped", h, limit)
            continue
        tasks += [("horizons", cfg.filter, method, h, s, inputs, targets, cfg) for s in cfg.seeds()]
    return _execute(tasks, cfg.workers)


def statistical_study(values, cfg):
    """``n_runs`` trainings that differ only in seed, summarised per metric.

    Returns ``(summaries, records)`` where ``summaries`` maps each metric to
    a StatsSummary over the completed runs (None with fewer than two).
    """
    if cfg.n_runs < 2:
        raise ValueError("the statistical study needs n_runs >= 2")
    values = np.asarray(values, dtype=float)
    inputs, targets = prepare(values, cfg, cfg.filter)
    h = cfg.horizons[-1]
    tasks = [("stats", cfg.filter, "model", h, s, inputs, targets, cfg) for s in cfg.seeds()]
    records = _execute(tasks, cfg.workers)
    done = [r for r in records if r.status == "complete"]
    summaries = {}
    for c in ("rmse", "mae", "mape", "smape"):
        summaries[c] = summarize([getattr(r.metrics, c) for r in done]) if len(done) >= 2 else None
    return summaries, records


def baseline_benchmark(values, cfg, horizons=(5, 60)):
    """Naive, AR and the model on the same split and filter."""
    values = np.asarray(values, dtype=float)
    inputs, targets = prepare(values, cfg, cfg.filter)
    tasks = [("baselines", cfg.filter, m, h, s, inputs, targets, cfg)
             for h in horizons for m in cfg.methods for s in cfg.seeds()]
    return _execute(tasks, cfg.workers)


# -- aggregation --------------------------------------------------------------


def _significant(a, b, alpha=0.05):
    """Paired Wilcoxon signed-rank test that ``a`` is below ``b``."""
    diff = np.asarray(a) - np.asarray(b)
    if diff.size < 2 or np.all(diff == 0):
        return False
    return bool(wilcoxon(diff, alternative="less").pvalue < alpha)


def aggregate(records, group_by=("filter", "method", "horizon")):
    """Mean metrics per group plus ``best_<metric>`` markers and a paired
    significance flag for the best RMSE group against the runner-up.

    Ties in the mean are broken by mean wall time.
    """
    groups = {}
    for r in records:
        groups.setdefault(tuple(getattr(r, g) for g in group_by), []).append(r)
    rows = []
    for key, rs in groups.items():
        done = [r for r in rs if r.status == "complete"]
        row = dict(zip(group_by, key))
        for c in ("rmse", "mae", "mape", "smape"):
            row[c] = float(np.mean([getattr(r.metrics, c) for r in done])) if done else None
        row["wall_time"] = float(np.mean([r.wall_time for r in rs]))
        row["runs"] = len(done)
        row["failed"] = len(rs) - len(done)
        row["_rmse"] = {r.seed: r.metrics.rmse for r in done}
        rows.append(row)
    # markers are assigned within each horizon so the sweep tables stay meaningful
    for h in {row.get("horizon") for row in rows}:
        block = [row for row in rows if row.get("horizon") == h]
        for c in ("rmse", "mae", "mape", "smape"):
            ranked = sorted((row for row in block if row[c] is not None and not math.isnan(row[c])),
                            key=lambda row: (row[c], row["wall_time"]))
            for row in block:
                row[f"best_{c}"] = bool(ranked) and row is ranked[0]
        ranked = sorted((row for row in block if row["rmse"] is not None),
                        key=lambda row: (row["rmse"], row["wall_time"]))
        for row in block:
            row["significant"] = False
        if len(ranked) >= 2:
            best, second = ranked[0]["_rmse"], ranked[1]["_rmse"]
            seeds = sorted(set(best) & set(second))
            ranked[0]["significant"] = _significant([best[s] for s in seeds], [second[s] for s in seeds])
    for row in rows:
        del row["_rmse"]
    return sorted(rows, key=lambda row: tuple(str(row[g]) if g != "horizon" else row[g] for g in group_by))


def summary_rows(summaries, n_completed):
    rows = []
    for metric, s in summaries.items():
        row = {"metric": metric, "runs": n_completed}
        row.update({f: (None if s is None else getattr(s, f)) for f in SUMMARY_FIELDS})
        rows.append(row)
    return rows


# -- persistence ----------------------------------------------------------------


def write_table(path, rows):
    if not rows:
        Path(path).write_text("")
        return
    with Path(path).open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), quoting=csv.QUOTE_MINIMAL)
        w.writeheader()
        w.writerows(rows)


def write_records(path, records):
    with Path(path).open("w") as fh:
        for r in records:
            fh.write(json.dumps(r.as_dict(), sort_keys=True) + "\n")


def read_records(path):
    return [RunRecord.from_dict(json.loads(line))
            for line in Path(path).read_text().splitlines() if line.strip()]


def new_run_dir(root, experiment):
    stamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%S%fZ")
    path = Path(root) / experiment / stamp
    path.mkdir(parents=True, exist_ok=False)
    return path


def plot_experiment(experiment, rows, path, records=None):
    done = [r for r in rows if r.get("rmse") is not None]
    if experiment == "filters":
        plotting.bar_chart([r["filter"] for r in done], [r["rmse"] for r in done], path,
                           title="mean RMSE by filter")
    elif experiment == "horizons":
        plotting.line_chart([r["horizon"] for r in done], {"RMSE": [r["rmse"] for r in done]}, path,
                            title="mean RMSE by horizon")
    elif experiment == "stats":
        ok = [r for r in (records or []) if r.status == "complete"]
        plotting.box_chart({"RMSE": [r.metrics.rmse for r in ok], "MAE": [r.metrics.mae for r in ok]},
                           path, title="spread over seeds")
    else:
        series = {}
        hs = sorted({r["horizon"] for r in done})
        for m in dict.fromkeys(r["method"] for r in done):
            by_h = {r["horizon"]: r["rmse"] for r in done if r["method"] == m}
            series[m] = [by_h.get(h, float("nan")) for h in hs]
        plotting.line_chart(hs, series, path, title="mean RMSE by method")


def run_experiment(values, cfg):
    """Dispatch ``cfg.experiment``; returns ``(records, table_rows)``."""
    if cfg.experiment == "filters":
        records = filter_comparison(values, cfg)
        return records, aggregate(records)
    if cfg.experiment == "horizons":
        records = horizon_sweep(values, cfg)
        return records, aggregate(records)
    if cfg.experiment == "stats":
        summaries, records = statistical_study(values, cfg)
        return records, summary_rows(summaries, sum(r.status == "complete" for r in records))
    records = baseline_benchmark(values, cfg, horizons=cfg.horizons)
    return records, aggregate(records)


def persist(out_dir, cfg, records, rows):
    """Write records.jsonl, table.csv and plot.svg into ``out_dir``."""
    out_dir = Path(out_dir)
    write_records(out_dir / "records.jsonl", records)
    write_table(out_dir / "table.csv", rows)
    plot_experiment(cfg.experiment, rows, out_dir / "plot.svg", records)
    return out_dir


def config_dict(cfg):
    d = asdict(cfg)
    for f in fields(cfg):
        if isinstance(d[f.name], tuple):
            d[f.name] = list(d[f.name])
    return d
