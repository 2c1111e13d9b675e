"""Acceptance suite: one PASS/FAIL line per criterion, printed even under capture."""

import json
import math
import os
import time

import numpy as np
import pytest
import yaml

from leakcast import bench, cli
from leakcast.filters import apply_filter, butterworth_design
from leakcast.filters.hp import hp_trend
from leakcast.forecaster import forward
from leakcast.metrics import SUMMARY_FIELDS, evaluate, summarize
from leakcast.series import downsample, synthetic_leakage
from leakcast.tpe import SearchSpace, optimize
from tests.test_forecaster import gradient_errors, perturbed, reference_attention, tiny_cfg, window

TUNED = dict(embed_dim=18, num_heads=3, learning_rate=9.77e-3, batch_size=17, dropout=0.143, epochs=30)


@pytest.fixture
def verdict(capsys):
    def emit(number, title, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number:2d} {title}: {detail}")
        assert ok, detail

    return emit


@pytest.fixture(scope="module")
def surrogate():
    return downsample(synthetic_leakage(seed=0), 100).values


def test_01_filter_reconstruction(verdict):
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(20):
        n = int(rng.integers(256, 1025))
        t = np.arange(n)
        x = (rng.normal() + rng.normal(0, 0.01) * t + rng.uniform(0.1, 1) * np.sin(2 * np.pi * t / 24)
             + rng.uniform(0.1, 1) * np.sin(2 * np.pi * t / 7) + 0.2 * rng.standard_normal(n))
        for name, params in (("stl", {"period": 24}), ("mstl", {"periods": (7, 24)}), ("ewt", None),
                             ("emd", {"max_imfs": 6})):
            r = apply_filter(name, x, params)
            worst = max(worst, np.max(np.abs(r.reconstruct() - x)) / np.max(np.abs(x)))
    elapsed = time.perf_counter() - start
    verdict(1, "filter reconstruction", worst < 1e-8 and elapsed < 30,
            f"max relative error {worst:.2e} (< 1e-8), {elapsed:.1f} s (< 30 s)")


def test_02_butterworth_gain(verdict):
    dc = cut = 0.0
    for order in range(1, 7):
        for fc in np.linspace(0.02, 0.45, 10):
            d = butterworth_design(order, fc, 1.0)
            dc = max(dc, abs(abs(d.response(0.0)) - 1))
            cut = max(cut, abs(abs(d.response(fc)) - 1 / math.sqrt(2)))
    verdict(2, "Butterworth analytic gains", dc < 1e-9 and cut < 1e-6,
            f"DC deviation {dc:.1e} (< 1e-9), cutoff deviation {cut:.1e} (< 1e-6)")


def test_03_hp_limits(verdict):
    rng = np.random.default_rng(3)
    t = np.arange(200.0)
    y = 0.1 + 0.001 * t + 0.05 * np.sin(t / 5) + 0.02 * rng.standard_normal(200)
    ident = np.max(np.abs(hp_trend(y, 1e-12) - y))
    line = np.polyval(np.polyfit(t, y, 1), t)
    flat = np.max(np.abs(hp_trend(y, 1e12) - line))
    verdict(3, "HP limits", ident < 1e-6 and flat < 1e-3,
            f"lambda=1e-12 gap {ident:.1e} (< 1e-6), lambda=1e12 gap to LS line {flat:.1e} (< 1e-3)")


def test_04_gradient_suite(verdict):
    start = time.perf_counter()
    errors = gradient_errors(tiny_cfg(), lam=0.05)
    elapsed = time.perf_counter() - start
    worst = max(errors, key=errors.get)
    ok = len(errors) == 16 and errors[worst] < 1e-4 and elapsed < 60
    verdict(4, "gradient suite", ok,
            f"{len(errors)} groups, worst {worst} {errors[worst]:.1e} (< 1e-4), {elapsed:.1f} s (< 60 s)")


def test_05_mechanism_reduction(verdict):
    cfg = tiny_cfg(gate=False)
    p = perturbed(cfg, seed=5)
    p.time_bias[:] = 0.0
    pred, _ = forward(p, window(), cfg)
    gap = float(np.max(np.abs(pred - reference_attention(p, window(), cfg.num_heads))))
    verdict(5, "mechanism reduction", gap < 1e-10, f"max gap to reference attention {gap:.1e} (< 1e-10)")


def test_06_tpe_efficacy(verdict):
    space = SearchSpace.from_dict({"x": ("real", 0.0, 1.0)})
    start = time.perf_counter()
    wins = 0
    for seed in range(20):
        best, _ = optimize(lambda p, s: (p["x"] - 0.3) ** 2, space, 50, seed=seed)
        rnd = np.random.default_rng(seed).uniform(0, 1, 50)
        wins += best.value <= np.min((rnd - 0.3) ** 2)
    elapsed = time.perf_counter() - start
    verdict(6, "TPE efficacy", wins >= 16 and elapsed < 10,
            f"TPE <= random search in {wins}/20 seeds (>= 16), {elapsed:.1f} s (< 10 s)")


def test_07_metric_oracle(verdict):
    m = evaluate([1.0, 2.0], [2.0, 2.0])
    gaps = [abs(m.rmse - math.sqrt(0.5)), abs(m.mae - 0.5), abs(m.mape - 50.0), abs(m.smape - 100 / 3)]
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(100):
        y, f = rng.uniform(0.5, 2, 20), rng.uniform(0.5, 2, 20)
        c = float(rng.uniform(0.01, 100))
        a, b = evaluate(y, f), evaluate(c * y, c * f)
        worst = max(worst, abs(b.rmse - c * a.rmse) / (c * a.rmse), abs(b.mae - c * a.mae) / (c * a.mae),
                    abs(b.mape - a.mape) / a.mape, abs(b.smape - a.smape) / a.smape)
    verdict(7, "metric oracle", max(gaps) < 1e-12 and worst < 1e-12,
            f"hand example gap {max(gaps):.1e} (< 1e-12), scale equivariance gap {worst:.1e} over 100 pairs")


def _rmse_by(records, attr):
    out = {}
    for r in records:
        out.setdefault(getattr(r, attr), {})[r.seed] = r.metrics.rmse
    return out


def test_08_filtered_beats_unfiltered(verdict, surrogate):
    cfg = bench.ExperimentConfig(experiment="filters", filters=("ewt",), model=TUNED, horizons=(60,), n_runs=10)
    start = time.perf_counter()
    records = bench.filter_comparison(surrogate, cfg)
    elapsed = time.perf_counter() - start
    assert all(r.status == "complete" for r in records)
    by = _rmse_by(records, "filter")
    wins = sum(by["ewt"][s] < by["original"][s] for s in cfg.seeds())
    verdict(8, "EWT vs unfiltered at horizon 60", wins >= 8 and elapsed < 600,
            f"EWT wins {wins}/10 seeds (>= 8); median RMSE {np.median(list(by['ewt'].values())):.2e} vs "
            f"{np.median(list(by['original'].values())):.2e} on the synthetic surrogate "
            f"(reference 3.15e-3 vs 6.06e-3); {elapsed:.0f} s (< 600 s)")


def test_09_short_beats_medium_horizon(verdict, surrogate):
    cfg = bench.ExperimentConfig(experiment="horizons", filter="ewt", model=TUNED, horizons=(5, 60), n_runs=10)
    by = _rmse_by(bench.horizon_sweep(surrogate, cfg), "horizon")
    short, medium = np.median(list(by[5].values())), np.median(list(by[60].values()))
    verdict(9, "horizon 5 vs horizon 60", len(by[5]) == len(by[60]) == 10 and short < medium,
            f"median RMSE {short:.2e} < {medium:.2e} over 10 seeds (reference 2.24e-4 vs 1.21e-3)")


def test_10_statistical_study(verdict, surrogate):
    small = dict(embed_dim=4, num_heads=1, input_size=12, epochs=3, batch_size=32)
    cfg = bench.ExperimentConfig(experiment="stats", filter="ewt", model=small, horizons=(60,), n_runs=50,
                                 eval_windows=32)
    summaries, records = bench.statistical_study(surrogate, cfg)
    s = summaries["rmse"]
    emitted = [f for f in SUMMARY_FIELDS if getattr(s, f) is not None and math.isfinite(getattr(s, f))]
    normal = summarize(np.random.default_rng(0).standard_normal(10_000))
    ok = (len(emitted) == 11 and len({r.seed for r in records}) == 50 and abs(normal.skewness) < 0.1
          and abs(normal.kurtosis - 3) < 0.2)
    verdict(10, "statistical study", ok,
            f"{len(emitted)}/11 statistics over 50 seeds; normal n=10000 skew {normal.skewness:+.3f}, "
            f"kurtosis {normal.kurtosis:.3f}")


def test_11_determinism(verdict, tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    conf = tmp_path / "c.yaml"
    conf.write_text(yaml.safe_dump({
        "dataset": {"synthetic_length": 30_000},
        "filter": {"name": "ewt"},
        "model": {"embed_dim": 6, "num_heads": 2, "input_size": 10, "epochs": 3, "dropout": 0.1},
        "experiment": {"name": "filters", "filters": ["ewt", "hp"], "horizons": [10], "n_runs": 2},
    }))
    dirs = []
    for argv in (["--config", str(conf), "--seed", "11"], None):
        argv = argv or ["--config", os.path.join(dirs[0], "config.yaml")]
        assert cli.main(["bench", "--out", "o", *argv]) == 0
        dirs.append(json.loads(capsys.readouterr().out.strip().splitlines()[-1])["out_dir"])

    def records(d):
        return [bench.comparable(r) for r in bench.read_records(os.path.join(d, "records.jsonl"))]

    first, second = records(dirs[0]), records(dirs[1])
    verdict(11, "determinism", len(first) == 6 and first == second,
            f"{len(first)} records re-run from the persisted config are identical apart from wall time")
