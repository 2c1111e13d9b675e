"""Empirical mode decomposition by cubic-spline envelope sifting."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .base import DecompositionResult

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EmdParams:
    max_imfs: int = 10
    sift_tolerance: float = 0.2
    max_sift_iters: int = 50
    mirror_points: int = 2

    def __post_init__(self):
        if self.max_sift_iters < 1:
            raise ValueError("max_sift_iters must be at least 1")
        if self.max_imfs < 0:
            raise ValueError("max_imfs must be non-negative")
        if not self.sift_tolerance > 0:
            raise ValueError("sift_tolerance must be positive")


def find_extrema(x):
    """Indices of local maxima and minima; a plateau counts once, at its first sample."""
    d = np.diff(x)
    sign = np.sign(d)
    # carry the last non-zero slope across flat stretches
    nz = np.flatnonzero(sign)
    if nz.size == 0:
        return np.empty(0, int), np.empty(0, int)
    filled = sign[nz[np.maximum(np.searchsorted(nz, np.arange(sign.size), side="right") - 1, 0)]]
    filled[: nz[0]] = sign[nz[0]]
    change = np.diff(filled)
    maxima = np.flatnonzero(change < 0) + 1
    minima = np.flatnonzero(change > 0) + 1
    # move plateau extrema back to the plateau start
    def start(idx):
        out = idx.copy()
        for k, i in enumerate(idx):
            j = i
            while j > 0 and x[j - 1] == x[i]:
                j -= 1
            out[k] = j
        return out
    return start(maxima), start(minima)


def zero_crossings(x):
    s = np.sign(x)
    s = s[s != 0]
    return int(np.count_nonzero(s[1:] != s[:-1]))


def _mirror(idx, values, n, k):
    """Reflect the first/last ``k`` extrema about the series end points."""
    left = idx[:k]
    right = idx[-k:]
    t = np.concatenate((-left[::-1], idx, 2 * (n - 1) - right[::-1])).astype(float)
    v = np.concatenate((values[left][::-1], values[idx], values[right][::-1]))
    t, keep = np.unique(t, return_index=True)
    return t, v[keep]


def envelope_mean(h, maxima, minima, mirror_points=2):
    n = h.size
    grid = np.arange(n, dtype=float)
    tu, vu = _mirror(maxima, h, n, mirror_points)
    tl, vl = _mirror(minima, h, n, mirror_points)
    upper = CubicSpline(tu, vu)(grid)
    lower = CubicSpline(tl, vl)(grid)
    return 0.5 * (upper + lower)


def _oscillates(x):
    maxima, minima = find_extrema(x)
    return maxima.size >= 2 and minima.size >= 2


def sift(x, p=EmdParams()):
    """Extract one IMF from ``x``.

    Stops when the normalised squared change between successive candidates
    drops below ``p.sift_tolerance``, when the candidate meets the IMF
    conditions (extrema and zero-crossing counts within one, envelope mean
    negligible), or after ``p.max_sift_iters`` passes.
    """
    h = np.asarray(x, dtype=float).copy()
    for it in range(1, p.max_sift_iters + 1):
        maxima, minima = find_extrema(h)
        if maxima.size < 2 or minima.size < 2:
            break
        m = envelope_mean(h, maxima, minima, p.mirror_points)
        h_new = h - m
        energy = np.sum(h**2)
        sd = np.sum(m**2) / energy if energy > 0 else 0.0
        h = h_new
        if sd < p.sift_tolerance:
            break
        maxima, minima = find_extrema(h)
        n_ext = maxima.size + minima.size
        if abs(n_ext - zero_crossings(h)) <= 1 and np.sqrt(np.mean(m**2)) < 1e-3 * np.sqrt(np.mean(h**2)):
            break
    else:
        logger.debug("sifting hit max_sift_iters=%d", p.max_sift_iters)
    return h


def emd_decompose(s, p=EmdParams()):
    """Decompose ``s`` into IMFs (highest frequency first) plus a final residual.

    A series without two maxima and two minima yields no IMFs and the input
    as residual. ``filtered`` is the residual plus the last IMF.
    """
    x = np.asarray(getattr(s, "values", s), dtype=float)
    if x.size < 8:
        raise ValueError(f"EMD needs at least 8 samples, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise ValueError("EMD input contains non-finite values")
    imfs = []
    remainder = x.copy()
    while len(imfs) < p.max_imfs and _oscillates(remainder):
        c = sift(remainder, p)
        imfs.append(c)
        remainder = remainder - c
    residual = x - np.sum(imfs, axis=0) if imfs else x.copy()
    filtered = residual + imfs[-1] if imfs else residual.copy()
    return DecompositionResult(trend=np.zeros_like(x), seasonals=imfs, residual=residual,
                               filtered=filtered, method="emd", info={"n_imfs": len(imfs)})
