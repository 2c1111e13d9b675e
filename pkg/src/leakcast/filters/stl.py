"""Seasonal-trend decomposition by LOESS, single and multiple seasonality."""

from __future__ import annotations

import math

import numpy as np

from .base import DecompositionResult
from .loess import LoessParams, loess_points


def _odd(x):
    k = int(math.ceil(x))
    return k if k % 2 else k + 1


def _moving_average(x, length):
    c = np.cumsum(np.concatenate(([0.0], x)))
    return (c[length:] - c[:-length]) / length


def _bisquare(r):
    r = np.abs(r)
    return np.where(r < 1.0, (1.0 - r**2) ** 2, 0.0)


def default_trend_points(period, seasonal_points):
    return _odd(1.5 * period / (1.0 - 1.5 / seasonal_points))


def _cycle_subseries(detrended, period, q, rw):
    """Smooth each cycle-subseries and extrapolate one period at both ends."""
    n = detrended.size
    out = np.empty(n + 2 * period)
    for phase in range(period):
        t = np.arange(phase, n, period, dtype=float)
        targets = np.concatenate(([t[0] - period], t, [t[-1] + period]))
        fit = loess_points(t, detrended[phase::period], q, 1, targets, rw[phase::period],
                           fallback=True)
        out[targets.astype(int) + period] = fit
    return out


def _low_pass(c_ext, period, q):
    n = c_ext.size - 2 * period
    m = _moving_average(_moving_average(_moving_average(c_ext, period), period), 3)
    t = np.arange(n, dtype=float)
    return loess_points(t, m, q, 1)


def stl_decompose(s, period, p=None, *, seasonal_points=7, inner_iters=2, robust_iters=0):
    """Cleveland et al. STL.

    ``p`` controls the trend smoother; when omitted the classic window of
    ``1.5 * period / (1 - 1.5 / seasonal_points)`` points (rounded to odd) is
    used with degree 1. The seasonal smoother spans ``seasonal_points``
    points of each cycle-subseries and the low-pass smoother the next odd
    integer above ``period``. ``robust_iters`` outer passes recompute
    bisquare robustness weights from the residual.
    """
    y = np.asarray(getattr(s, "values", s), dtype=float)
    n = y.size
    period = int(period)
    if period < 2:
        raise ValueError("STL period must be at least 2")
    if n < 2 * period:
        raise ValueError(f"STL period {period} is too large for a series of length {n}")
    if seasonal_points < 3:
        raise ValueError("seasonal_points must be at least 3")
    if p is None:
        q_trend, deg_trend = default_trend_points(period, seasonal_points), 1
    else:
        q_trend, deg_trend = max(math.ceil(p.span_fraction * n), p.degree + 2), p.degree
    q_low = _odd(period)
    t = np.arange(n, dtype=float)

    trend = np.zeros(n)
    seasonal = np.zeros(n)
    rw = np.ones(n)
    for outer in range(robust_iters + 1):
        for _ in range(inner_iters):
            c_ext = _cycle_subseries(y - trend, period, seasonal_points, rw)
            low = _low_pass(c_ext, period, q_low)
            seasonal = c_ext[period : period + n] - low
            trend = loess_points(t, y - seasonal, q_trend, deg_trend, robustness=rw,
                                 fallback=True)
        if outer < robust_iters:
            r = y - trend - seasonal
            h = 6.0 * np.median(np.abs(r))
            rw = _bisquare(r / h) if h > 0 else np.ones(n)
    residual = y - trend - seasonal
    return DecompositionResult(trend=trend, seasonals=[seasonal], residual=residual,
                               filtered=trend, method="stl",
                               info={"period": period, "trend_points": q_trend})


def mstl_decompose(s, periods, p=None, *, iterations=2, robust_iters=1, inner_iters=2):
    """Multiple seasonal STL: one seasonal component per period, ascending.

    Each pass adds a component back to the deseasonalised series, re-runs STL
    for its period and removes the new estimate. The trend is taken from the
    final STL fit; residual closes the additive identity.
    """
    y = np.asarray(getattr(s, "values", s), dtype=float)
    periods = [int(k) for k in periods]
    if not periods:
        raise ValueError("at least one period is required")
    if len(set(periods)) != len(periods):
        raise ValueError(f"duplicate seasonal periods: {periods}")
    if any(b <= a for a, b in zip(periods, periods[1:])):
        raise ValueError(f"periods must be strictly increasing: {periods}")
    if periods[0] < 2:
        raise ValueError("every period must be at least 2")
    if y.size < 2 * periods[-1]:
        raise ValueError(f"series of length {y.size} is too short for period {periods[-1]}")

    seasonals = [np.zeros_like(y) for _ in periods]
    deseason = y.copy()
    trend = None
    for _ in range(iterations):
        for j, period in enumerate(periods):
            deseason = deseason + seasonals[j]
            fit = stl_decompose(deseason, period, p, seasonal_points=7 + 4 * j,
                                inner_iters=inner_iters, robust_iters=robust_iters)
            seasonals[j] = fit.seasonals[0]
            trend = fit.trend
            deseason = deseason - seasonals[j]
    residual = y - trend - sum(seasonals)
    return DecompositionResult(trend=trend, seasonals=seasonals, residual=residual,
                               filtered=trend, method="mstl", info={"periods": periods})
