"""Reference forecasters used in the benchmark tables."""

from __future__ import annotations

import numpy as np


def naive_baseline(series_tail, horizon):
    """Repeat the last observed value."""
    tail = np.asarray(series_tail, dtype=float)
    if tail.size == 0:
        raise ValueError("naive baseline needs at least one observation")
    return np.full(int(horizon), tail[-1])


def fit_ar(train_series, p, *, intercept=False, strict=True):
    """Least-squares AR(p) coefficients, lag 1 first (intercept appended when requested).

    A rank-deficient design raises unless ``strict`` is false, in which case
    the minimum-norm solution is returned (a constant series then gets
    coefficients summing to one and is continued exactly).
    """
    y = np.asarray(train_series, dtype=float)
    if not 1 <= p < y.size:
        raise ValueError(f"AR order {p} must satisfy 1 <= p < {y.size}")
    rows = y.size - p
    X = np.column_stack([y[p - k : p - k + rows] for k in range(1, p + 1)])
    if intercept:
        X = np.column_stack([X, np.ones(rows)])
    target = y[p:]
    coef, _, rank, _ = np.linalg.lstsq(X, target, rcond=None)
    if strict and rank < X.shape[1]:
        raise np.linalg.LinAlgError(f"AR({p}) design matrix is rank deficient (rank {rank})")
    return coef


def ar_forecast(coef, history, horizon, *, intercept=False):
    p = coef.size - (1 if intercept else 0)
    buf = list(np.asarray(history, dtype=float)[-p:])
    if len(buf) < p:
        raise ValueError(f"need {p} past values for AR({p})")
    out = []
    for _ in range(int(horizon)):
        nxt = float(np.dot(coef[:p], buf[::-1][:p]))
        if intercept:
            nxt += coef[-1]
        out.append(nxt)
        buf.append(nxt)
    return np.asarray(out)


def ar_baseline(train_series, p, horizon, *, history=None, intercept=False):
    """Fit AR(p) on ``train_series`` and iterate it ``horizon`` steps past ``history``
    (default: the end of the training series)."""
    coef = fit_ar(train_series, p, intercept=intercept)
    return ar_forecast(coef, train_series if history is None else history, horizon, intercept=intercept)
