"""Pipeline configuration: one YAML file, a fixed key schema and a defaults table.

Validation collects every problem before failing so a user can fix a
config in one pass. Only the output directory and the thread count may be
overridden from the environment (``LEAKCAST_OUT``, ``LEAKCAST_THREADS``).
"""

from __future__ import annotations

import copy
import dataclasses
import os
import zlib
from pathlib import Path

import numpy as np
import yaml

from .bench import EXPERIMENTS, METHODS, ExperimentConfig
from .errors import ConfigError
from .filters import FILTER_NAMES, resolve_params
from .forecaster import ModelConfig
from .tpe import DEFAULT_SPACE, SearchSpace

ENV_OUT = "LEAKCAST_OUT"
ENV_THREADS = "LEAKCAST_THREADS"

_MODEL_DEFAULTS = {f.name: f.default for f in dataclasses.fields(ModelConfig) if f.name != "seed"}

DEFAULTS = {
    "seed": 0,
    "threads": 1,
    "out": "results",
    "dataset": {
        "path": None,  # None selects the synthetic surrogate
        "column": "current",
        "delimiter": ",",
        "dt": 1.0,
        "unit": "A",
        "downsample": 100,
        "method": "mean",
        "synthetic_length": 96_800,
    },
    "filter": {"name": "ewt", "params": {}},
    "model": _MODEL_DEFAULTS,
    "split": {"test_fraction": 0.2},
    "tpe": {
        "space": {k: {"kind": v[0], "lo": v[1], "hi": v[2]} for k, v in DEFAULT_SPACE.items()},
        "n_trials": 25,
        "gamma_fraction": 0.25,
        "n_startup": 10,
        "n_candidates": 24,
        "validation_fraction": 0.2,
    },
    "experiment": {
        "name": "filters",
        "filters": ["original", *FILTER_NAMES],
        "filter_params": {},
        "horizons": list(range(5, 61, 5)),
        "step": 5,
        "n_runs": 10,
        "fixed_seed": False,
        "eval_windows": 64,
        "target": "filtered",
        "methods": list(METHODS),
        "ar_order": 2,
    },
    "fault": {"threshold": 0.2},
    "predict": {"checkpoint": None},
}

# blocks whose contents are free-form maps rather than fixed keys
_OPEN_KEYS = {("filter", "params"), ("experiment", "filter_params"), ("tpe", "space")}

_TYPES = {
    "seed": int, "threads": int, "out": str,
    "dataset.path": (str, type(None)), "dataset.column": str, "dataset.delimiter": str,
    "dataset.dt": (int, float), "dataset.unit": str, "dataset.downsample": int,
    "dataset.method": str, "dataset.synthetic_length": int,
    "filter.name": str, "split.test_fraction": (int, float),
    "tpe.n_trials": int, "tpe.gamma_fraction": (int, float), "tpe.n_startup": int,
    "tpe.n_candidates": int, "tpe.validation_fraction": (int, float),
    "experiment.name": str, "experiment.filters": list, "experiment.horizons": list,
    "experiment.step": int, "experiment.n_runs": int, "experiment.fixed_seed": bool,
    "experiment.eval_windows": (int, type(None)), "experiment.target": str,
    "experiment.methods": list, "experiment.ar_order": int,
    "fault.threshold": (int, float), "predict.checkpoint": (str, type(None)),
}


def derive_seed(root, component):
    """Deterministic per-component seed from the root seed."""
    tag = zlib.crc32(component.encode())
    return int(np.random.SeedSequence([int(root), tag]).generate_state(1)[0])


def _merge(defaults, given, path, violations):
    out = copy.deepcopy(defaults)
    if not isinstance(given, dict):
        violations.append(f"{'.'.join(path) or 'config'}: expected a mapping")
        return out
    for key, value in given.items():
        here = (*path, key)
        if key not in defaults:
            violations.append(f"{'.'.join(here)}: unknown key")
        elif isinstance(defaults[key], dict) and here not in _OPEN_KEYS:
            out[key] = _merge(defaults[key], value, here, violations)
        else:
            out[key] = value
    return out


def _check_types(cfg, violations):
    bad = set()
    for dotted, kind in _TYPES.items():
        block, _, key = dotted.rpartition(".")
        value = cfg[block][key] if block else cfg[key]
        bad_bool = isinstance(value, bool) and kind in (int, (int, float))
        if bad_bool or not isinstance(value, kind):
            violations.append(f"{dotted}: unexpected type {type(value).__name__}")
            bad.add(dotted)
    return bad


def _try(violations, prefix, fn):
    try:
        return fn()
    except Exception as exc:  # noqa: BLE001 - every failure becomes a listed violation
        violations.append(f"{prefix}: {exc}")
        return None


_RANGES = [
    ("seed", lambda v: v >= 0, "must be non-negative"),
    ("threads", lambda v: v >= 1, "must be at least 1"),
    ("dataset.downsample", lambda v: v >= 1, "must be at least 1"),
    ("dataset.method", lambda v: v in ("mean", "decimate"), "must be 'mean' or 'decimate'"),
    ("dataset.dt", lambda v: v > 0, "must be positive"),
    ("dataset.synthetic_length", lambda v: v >= 1, "must be positive"),
    ("split.test_fraction", lambda v: 0 < v < 1, "must lie in (0, 1)"),
    ("tpe.n_trials", lambda v: v >= 1, "must be at least 1"),
    ("tpe.gamma_fraction", lambda v: 0 < v < 1, "must lie in (0, 1)"),
    ("tpe.validation_fraction", lambda v: 0 < v < 1, "must lie in (0, 1)"),
    ("experiment.name", lambda v: v in EXPERIMENTS, f"must be one of {EXPERIMENTS}"),
    ("fault.threshold", lambda v: v > 0, "must be positive"),
]


def validate(raw):
    """Merge ``raw`` over the defaults and check it; raises ConfigError listing all violations."""
    violations = []
    cfg = _merge(DEFAULTS, raw or {}, (), violations)
    bad = _check_types(cfg, violations)
    for dotted, ok, msg in _RANGES:
        if dotted in bad:
            continue
        block, _, key = dotted.rpartition(".")
        if not ok(cfg[block][key] if block else cfg[key]):
            violations.append(f"{dotted}: {msg}")
    _try(violations, "filter", lambda: resolve_params(cfg["filter"]["name"], cfg["filter"]["params"]))
    model_ok = _try(violations, "model", lambda: ModelConfig(**cfg["model"])) is not None
    tpe = cfg["tpe"]
    _try(violations, "tpe.space", lambda: SearchSpace.from_dict(tpe["space"]))
    if isinstance(tpe["space"], dict):
        dims = [k for k in tpe["space"] if k not in _MODEL_DEFAULTS or k in ("horizon", "input_size")]
        if dims:
            violations.append(f"tpe.space: not tunable model fields {dims}")
    exp = cfg["experiment"]
    if "experiment.filters" not in bad:
        for f in exp["filters"]:
            if f not in ("original", *FILTER_NAMES):
                violations.append(f"experiment.filters: unknown filter {f!r}")
    if isinstance(exp["filter_params"], dict):
        for f, p in exp["filter_params"].items():
            _try(violations, f"experiment.filter_params.{f}", lambda f=f, p=p: resolve_params(f, p))
    else:
        violations.append("experiment.filter_params: expected a mapping")
    if model_ok:
        # mistyped keys are already reported; check the rest against their defaults
        probe = copy.deepcopy(cfg)
        for dotted in bad:
            block, _, key = dotted.rpartition(".")
            (probe[block] if block else probe)[key] = DEFAULTS[block][key] if block else DEFAULTS[key]
        _try(violations, "experiment", lambda: experiment_config(probe))
    if violations:
        raise ConfigError(violations)
    return cfg


def load(path=None, overrides=None):
    """Read, override and validate a config. ``path=None`` uses the defaults alone."""
    raw = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        try:
            raw = yaml.safe_load(p.read_text()) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"config is not valid YAML: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError("config: top level must be a mapping")
    raw = copy.deepcopy(raw)
    env_out, env_threads = os.environ.get(ENV_OUT), os.environ.get(ENV_THREADS)
    if env_out:
        raw["out"] = env_out
    if env_threads:
        try:
            raw["threads"] = int(env_threads)
        except ValueError:
            raise ConfigError(f"{ENV_THREADS}: not an integer: {env_threads!r}") from None
    for key, value in (overrides or {}).items():
        if value is not None:
            raw[key] = value
    return validate(raw)


def dump(cfg, path):
    Path(path).write_text(yaml.safe_dump(cfg, sort_keys=False))


def model_config(cfg, **changes):
    """ModelConfig from the model block, seeded from the root seed."""
    fields = {**cfg["model"], "seed": derive_seed(cfg["seed"], "model"), **changes}
    return ModelConfig(**fields)


def experiment_config(cfg):
    exp = cfg["experiment"]
    model = {k: v for k, v in cfg["model"].items() if k != "horizon"}
    return ExperimentConfig(
        experiment=exp["name"],
        filters=tuple(exp["filters"]),
        filter_params={cfg["filter"]["name"]: dict(cfg["filter"]["params"]), **exp["filter_params"]},
        filter=cfg["filter"]["name"],
        model=model,
        horizons=tuple(exp["horizons"]),
        step=exp["step"],
        n_runs=exp["n_runs"],
        seed_base=cfg["seed"],
        fixed_seed=exp["fixed_seed"],
        test_fraction=cfg["split"]["test_fraction"],
        eval_windows=exp["eval_windows"],
        target=exp["target"],
        methods=tuple(exp["methods"]),
        ar_order=exp["ar_order"],
        workers=cfg["threads"],
    )
