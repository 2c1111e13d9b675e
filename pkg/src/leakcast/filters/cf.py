"""Christiano-Fitzgerald band-pass filter, random-walk variant."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import DecompositionResult


@dataclass(frozen=True)
class CfParams:
    """Pass band given as cycle periods in samples.

    ``low_period=2`` puts the upper edge of the band at Nyquist, so the
    extracted cycle holds every fluctuation shorter than ``high_period`` and
    the complement is a low-pass trend. The default asymmetric filter uses
    every sample of the series, so its last output depends on past and
    present samples only. ``window`` is the one-side lag length of the
    fixed-window symmetric variant.
    """

    low_period: float = 2.0
    high_period: float = 32.0
    window: int = 96
    symmetric: bool = False

    def __post_init__(self):
        if not (0 < self.low_period < self.high_period):
            raise ValueError("CF periods must satisfy 0 < low_period < high_period")
        if self.low_period < 2:
            raise ValueError("low_period below 2 samples is above Nyquist")
        if self.window < 1:
            raise ValueError("CF window must be at least 1")


def ideal_weights(low_period, high_period, length):
    """Fourier coefficients B_0..B_{length-1} of the ideal band-pass response."""
    a = 2 * np.pi / high_period
    b = 2 * np.pi / low_period
    j = np.arange(1, length)
    w = np.empty(length)
    w[0] = (b - a) / np.pi
    w[1:] = (np.sin(b * j) - np.sin(a * j)) / (np.pi * j)
    return w


def _side_weights(B, reach):
    """Weights on lags 1..reach with the random-walk lump on the farthest lag.

    Everything beyond ``reach`` is treated as equal to the last available
    sample, so its ideal weights are folded onto it. With ``reach == 0`` the
    whole side collapses onto the centre sample.
    """
    if reach == 0:
        return np.empty(0), -B[0] / 2
    w = B[1 : reach + 1].copy()
    w[-1] = -B[0] / 2 - B[1:reach].sum()
    return w, 0.0


def cf_weights(p, back, forward):
    """(centre, past weights for lags 1..back, future weights for leads 1..forward)."""
    B = ideal_weights(p.low_period, p.high_period, p.window + 1)
    past, c1 = _side_weights(B, back)
    fut, c2 = _side_weights(B, forward)
    return B[0] + c1 + c2, past, fut


def cf_cycle(y, p):
    """Band-pass component; weights sum to zero at every position.

    Asymmetric mode reaches back to the first sample and forward to the last;
    symmetric mode reaches ``window`` samples each way, clipped at the ends.
    """
    y = np.asarray(y, dtype=float)
    n = y.size
    B = ideal_weights(p.low_period, p.high_period, (p.window if p.symmetric else n) + 1)
    cycle = np.empty(n)
    for t in range(n):
        if p.symmetric:
            back, fwd = min(t, p.window), min(n - 1 - t, p.window)
        else:
            back, fwd = t, n - 1 - t
        past, c1 = _side_weights(B, back)
        fut, c2 = _side_weights(B, fwd)
        acc = (B[0] + c1 + c2) * y[t]
        if back:
            acc += past @ y[t - back : t][::-1]
        if fwd:
            acc += fut @ y[t + 1 : t + 1 + fwd]
        cycle[t] = acc
    return cycle


def cf_filter(s, p=CfParams()):
    """Split ``s`` into the CF cycle and its complement (the trend fed downstream).

    Outputs near either end use shorter, re-lumped weight sets; at the final
    sample no future values exist, so only past and present ones enter.
    """
    y = np.asarray(getattr(s, "values", s), dtype=float)
    if y.size <= 2 * p.window:
        raise ValueError(f"series of length {y.size} is too short for CF window {p.window}")
    cycle = cf_cycle(y, p)
    trend = y - cycle
    # residual = input - filtered, i.e. the extracted cycle itself
    return DecompositionResult(trend=trend, residual=cycle, filtered=trend, method="cf",
                               info={"symmetric": p.symmetric, "window": p.window})
