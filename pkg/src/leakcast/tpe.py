"""Tree-structured Parzen estimator over a flat box of hyperparameters.

The observed trials are split at the gamma-quantile of their objective into
a "good" and a "bad" set. Each set gets an independent Gaussian KDE per
dimension, ``l(x)`` and ``g(x)``, and new points maximise ``l(x) / g(x)``
among candidates drawn from ``l``.
"""

from __future__ import annotations

import json
import math
import time
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import ndtr
from scipy.stats import truncnorm

from .filters.loess import loess_points

KINDS = ("int", "real", "log")
DEFAULT_SPACE = {
    "batch_size": ("int", 10, 20),
    "num_heads": ("int", 1, 8),
    "learning_rate": ("real", 0.001, 0.01),
    "dropout": ("real", 0.0, 0.7),
}


@dataclass(frozen=True)
class Dimension:
    name: str
    kind: str
    lo: float
    hi: float

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"dimension {self.name!r}: kind must be one of {KINDS}")
        if not self.lo < self.hi:
            raise ValueError(f"dimension {self.name!r}: lower bound must be below upper bound")
        if self.kind == "int" and (self.lo != int(self.lo) or self.hi != int(self.hi)):
            raise ValueError(f"dimension {self.name!r}: integer bounds must be integral")
        if self.kind == "log" and self.lo <= 0:
            raise ValueError(f"dimension {self.name!r}: log bounds must be positive")

    @property
    def internal_bounds(self):
        """Bounds of the continuous space the KDE lives in."""
        if self.kind == "int":
            return self.lo - 0.5, self.hi + 0.5
        if self.kind == "log":
            return math.log(self.lo), math.log(self.hi)
        return float(self.lo), float(self.hi)

    def to_internal(self, value):
        return math.log(value) if self.kind == "log" else float(value)

    def to_external(self, u):
        if self.kind == "int":
            return int(min(max(round(u), self.lo), self.hi))
        if self.kind == "log":
            return float(min(max(math.exp(u), self.lo), self.hi))
        return float(min(max(u, self.lo), self.hi))

    def contains(self, value):
        if self.kind == "int" and value != int(value):
            return False
        return self.lo <= value <= self.hi


@dataclass(frozen=True)
class SearchSpace:
    dims: tuple

    def __post_init__(self):
        names = [d.name for d in self.dims]
        if len(set(names)) != len(names):
            raise ValueError("search space dimension names must be unique")

    @classmethod
    def from_dict(cls, spec):
        """``{name: (kind, lo, hi)}`` or ``{name: {"kind":..., "lo":..., "hi":...}}``."""
        dims = []
        for name, v in spec.items():
            if isinstance(v, dict):
                dims.append(Dimension(name, v["kind"], v["lo"], v["hi"]))
            else:
                kind, lo, hi = v
                dims.append(Dimension(name, kind, lo, hi))
        return cls(tuple(dims))

    @property
    def names(self):
        return [d.name for d in self.dims]

    def check(self, params):
        missing = [d.name for d in self.dims if d.name not in params]
        if missing:
            raise ValueError(f"parameters missing: {missing}")
        bad = [d.name for d in self.dims if not d.contains(params[d.name])]
        if bad:
            raise ValueError(f"parameters out of bounds: {bad}")

    def sample_uniform(self, rng):
        out = {}
        for d in self.dims:
            lo, hi = d.internal_bounds
            out[d.name] = d.to_external(rng.uniform(lo, hi))
        return out


@dataclass
class Trial:
    number: int
    params: dict
    value: float | None = None
    seed: int = 0
    status: str = "complete"
    wall_time: float = 0.0
    error: str | None = None

    def __post_init__(self):
        if self.status == "complete" and (self.value is None or not math.isfinite(self.value)):
            raise ValueError(f"complete trial {self.number} needs a finite value")

    def to_json(self):
        return json.dumps(asdict(self), sort_keys=True)


@dataclass
class TpeState:
    history: list = field(default_factory=list)
    gamma_fraction: float = 0.25
    n_startup: int = 10
    n_candidates: int = 24
    bandwidths: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0 < self.gamma_fraction < 1:
            raise ValueError("gamma_fraction must lie in (0, 1)")

    @property
    def complete(self):
        return [i for i, t in enumerate(self.history) if t.status == "complete"]


def gamma_split(state):
    """Indices (into ``state.history``) of the good and bad complete trials.

    ``n_good = ceil(gamma_fraction * n)`` clipped to [1, n - 1]; gamma is the
    objective of the first trial ranked outside the good set and good means
    ``y < gamma``. Ties are ranked by trial order, and if ties at the minimum
    leave the good set empty the earliest best trial is used alone.
    """
    idx = state.complete
    if len(idx) < 2:
        raise ValueError("gamma split needs at least 2 complete trials")
    ys = np.array([state.history[i].value for i in idx])
    order = np.argsort(ys, kind="stable")
    n_good = min(max(math.ceil(state.gamma_fraction * len(idx)), 1), len(idx) - 1)
    gamma = ys[order[n_good]]
    good = {idx[k] for k in range(len(idx)) if ys[k] < gamma}
    if not good:
        good = {idx[order[0]]}
    bad = set(idx) - good
    return good, bad


def scott_bandwidth(points, lo, hi):
    """1.06 * sigma * n^(-1/5), kept within [(hi - lo) / min(100, n + 1), hi - lo]."""
    points = np.asarray(points, dtype=float)
    n = points.size
    width = hi - lo
    sigma = float(np.std(points)) if n > 1 else 0.0
    bw = 1.06 * sigma * n ** (-0.2)
    return float(min(max(bw, width / min(100, n + 1)), width))


def kde_eval(points, weights, bandwidth, x, bounds=None):
    """Weighted Gaussian KDE at ``x``; with ``bounds`` each kernel is renormalised to the interval."""
    points = np.asarray(points, dtype=float)
    if points.size == 0:
        raise ValueError("KDE needs at least one point")
    bw = np.broadcast_to(np.asarray(bandwidth, dtype=float), points.shape)
    if np.any(bw <= 0):
        raise ValueError("KDE bandwidth must be positive")
    w = np.ones(points.size) if weights is None else np.asarray(weights, dtype=float)
    w = w / w.sum()
    x = np.asarray(x, dtype=float)
    z = (x[..., None] - points) / bw
    k = np.exp(-0.5 * z**2) / (bw * math.sqrt(2 * math.pi))
    if bounds is not None:
        lo, hi = bounds
        mass = ndtr((hi - points) / bw) - ndtr((lo - points) / bw)
        k = k / mass
    return np.sum(w * k, axis=-1)


def _internal(trials, dim):
    return np.array([dim.to_internal(t.params[dim.name]) for t in trials])


def _refresh_bandwidths(state, space):
    if len(state.complete) < 2:
        state.bandwidths = {}
        return
    good, bad = gamma_split(state)
    bws = {}
    for label, members in (("good", good), ("bad", bad)):
        trials = [state.history[i] for i in sorted(members)]
        bws[label] = {d.name: scott_bandwidth(_internal(trials, d), *d.internal_bounds)
                      for d in space.dims}
    state.bandwidths = bws


def density_ratio(state, space, candidates, scale=1.0):
    """``scale * prod_d l(x_d) / g(x_d)`` for internal-coordinate candidates ``{name: array}``.

    ``scale`` stands in for the normalising constant p(y): it multiplies
    every candidate equally and so never changes the argmax.
    """
    good, bad = gamma_split(state)
    if not state.bandwidths:
        _refresh_bandwidths(state, space)
    log_ratio = 0.0
    for d in space.dims:
        bounds = d.internal_bounds
        pts_l = _internal([state.history[i] for i in sorted(good)], d)
        pts_g = _internal([state.history[i] for i in sorted(bad)], d)
        l = kde_eval(pts_l, None, state.bandwidths["good"][d.name], candidates[d.name], bounds)
        g = kde_eval(pts_g, None, state.bandwidths["bad"][d.name], candidates[d.name], bounds)
        log_ratio = log_ratio + np.log(l) - np.log(g)
    return scale * np.exp(log_ratio)


def suggest(state, space, rng):
    """Next point to evaluate: uniform during start-up, then the best of
    ``n_candidates`` draws from ``l`` ranked by ``l / g``."""
    if not space.dims:
        raise ValueError("search space is empty")
    if len(state.complete) < max(state.n_startup, 2):
        return space.sample_uniform(rng)
    if not state.bandwidths:
        _refresh_bandwidths(state, space)
    good, _ = gamma_split(state)
    good_trials = [state.history[i] for i in sorted(good)]
    candidates = {}
    for d in space.dims:
        lo, hi = d.internal_bounds
        centres = _internal(good_trials, d)
        bw = state.bandwidths["good"][d.name]
        pick = centres[rng.integers(0, centres.size, state.n_candidates)]
        a, b = (lo - pick) / bw, (hi - pick) / bw
        candidates[d.name] = truncnorm.rvs(a, b, loc=pick, scale=bw, random_state=rng)
    score = density_ratio(state, space, candidates)
    best = int(np.argmax(score))
    return {d.name: d.to_external(float(candidates[d.name][best])) for d in space.dims}


def observe(state, trial, space=None):
    """Append ``trial`` and refresh the KDE bandwidths (when ``space`` is given)."""
    if space is not None:
        space.check(trial.params)
    state.history.append(trial)
    if space is not None:
        _refresh_bandwidths(state, space)
    return state


def optimize(objective, space, n_trials, seed=0, *, gamma_fraction=0.25, n_startup=10,
             n_candidates=24, callback=None):
    """Minimise ``objective(params, seed)`` with TPE.

    Exceptions raised by the objective mark the trial as failed and the
    loop continues. Returns ``(best_trial, state)``; ``best_trial`` is None
    if every trial failed.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be at least 1")
    state = TpeState(gamma_fraction=gamma_fraction, n_startup=n_startup, n_candidates=n_candidates)
    root = np.random.SeedSequence(seed)
    rng = np.random.default_rng(root.spawn(1)[0])
    for number in range(n_trials):
        params = suggest(state, space, rng)
        trial_seed = int(np.random.SeedSequence([seed, number]).generate_state(1)[0])
        start = time.perf_counter()
        try:
            value = float(objective(params, trial_seed))
            if not math.isfinite(value):
                raise ValueError(f"objective returned {value}")
            trial = Trial(number, params, value, trial_seed, "complete", time.perf_counter() - start)
        except Exception as exc:  # noqa: BLE001 - any objective failure is recorded
            trial = Trial(number, params, None, trial_seed, "failed", time.perf_counter() - start,
                          error=f"{type(exc).__name__}: {exc}")
        observe(state, trial, space)
        if callback is not None:
            callback(trial)
    done = [state.history[i] for i in state.complete]
    best = min(done, key=lambda t: t.value) if done else None
    return best, state


def importance(history, space, *, span_fraction=0.5):
    """Share of objective variation explained by each hyperparameter.

    For every dimension a degree-1 LOESS of the objective on that
    hyperparameter alone is fitted; importance is the variance of the fitted
    curve, normalised over dimensions. A constant objective gives uniform
    importances and a ``RuntimeWarning``.
    """
    trials = [t for t in history if t.status == "complete"]
    if len(trials) < 10:
        raise ValueError("importance needs at least 10 complete trials")
    y = np.array([t.value for t in trials])
    names = space.names
    if np.ptp(y) == 0:
        warnings.warn("objective is constant across trials; importances are uniform",
                      RuntimeWarning, stacklevel=2)
        return {n: 1.0 / len(names) for n in names}
    q = max(math.ceil(span_fraction * y.size), 3)
    raw = {}
    for d in space.dims:
        x = _internal(trials, d)
        if np.ptp(x) == 0:
            raw[d.name] = 0.0
            continue
        order = np.argsort(x, kind="stable")
        fit = loess_points(x[order], y[order], q, 1, fallback=True)
        raw[d.name] = float(np.var(fit))
    total = sum(raw.values())
    if total == 0:
        return {n: 1.0 / len(names) for n in names}
    return {n: raw[n] / total for n in names}


def write_jsonl(history, path):
    with Path(path).open("w") as fh:
        for t in history:
            fh.write(t.to_json() + "\n")


def read_jsonl(path):
    return [Trial(**json.loads(line)) for line in Path(path).read_text().splitlines() if line.strip()]
