"""Locally weighted polynomial regression with the tricube kernel."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class LoessParams:
    span_fraction: float = 0.3
    degree: int = 1

    def __post_init__(self):
        if not 0 < self.span_fraction <= 1:
            raise ValueError("span_fraction must lie in (0, 1]")
        if self.degree not in (1, 2):
            raise ValueError("LOESS degree must be 1 or 2")


def tricube(u):
    u = np.abs(u)
    return np.where(u < 1.0, (1.0 - u**3) ** 3, 0.0)


def _window_starts(xs, x_eval, q):
    """Start index of the q nearest sorted neighbours of each evaluation point."""
    n = xs.size
    lo = np.zeros(x_eval.size, dtype=np.int64)
    hi = np.full(x_eval.size, n - q, dtype=np.int64)
    # first start whose right edge is at least as far as its left edge
    while True:
        active = lo < hi
        if not active.any():
            break
        mid = (lo + hi) // 2
        g = (xs[mid + q - 1] - x_eval) - (x_eval - xs[mid])
        move = active & (g < 0)
        lo = np.where(move, mid + 1, lo)
        hi = np.where(active & ~move, mid, hi)
    prev = np.maximum(lo - 1, 0)
    span_here = np.maximum(x_eval - xs[lo], xs[lo + q - 1] - x_eval)
    span_prev = np.maximum(x_eval - xs[prev], xs[prev + q - 1] - x_eval)
    return np.where(span_prev < span_here, prev, lo)


def loess_points(xs, ys, q, degree, x_eval=None, robustness=None, *, fallback=False,
                 chunk=1 << 20):
    """LOESS with a neighbourhood of ``q`` points.

    ``xs`` must be sorted ascending. When ``q`` exceeds the number of points
    the bandwidth is widened by ``(q - n) / 2`` mean spacings, following
    Cleveland's STL convention. With ``fallback`` a neighbourhood that
    cannot support the requested degree (typically because robustness
    weights zeroed it out) is fitted by its weighted mean instead, or by the
    plain tricube mean when every robustness weight is zero.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    n = xs.size
    x_eval = xs if x_eval is None else np.asarray(x_eval, dtype=float)
    rw = np.ones(n) if robustness is None else np.asarray(robustness, dtype=float)
    k = min(q, n)
    if k < degree + 1:
        raise ValueError(f"LOESS neighbourhood of {k} points cannot fit degree {degree}")
    out = np.empty(x_eval.size)
    step = max(1, chunk // k)
    offsets = np.arange(k)
    for start in range(0, x_eval.size, step):
        e = x_eval[start : start + step]
        lo = _window_starts(xs, e, k)
        idx = lo[:, None] + offsets[None, :]
        dx = xs[idx] - e[:, None]
        h = np.abs(dx).max(axis=1)
        if q > n:
            spacing = (xs[-1] - xs[0]) / max(n - 1, 1)
            h = h + 0.5 * (q - n) * spacing
        if np.any(h <= 0):
            bad = start + int(np.flatnonzero(h <= 0)[0])
            raise ValueError(f"degenerate LOESS neighbourhood at evaluation index {bad}: all x identical")
        u = dx / h[:, None]
        w = tricube(u) * rw[idx]
        # columns 1, u, u^2 evaluated around the target; the fit at u=0 is beta_0
        V = np.stack([u**j for j in range(degree + 1)], axis=-1)
        WV = V * w[..., None]
        A = np.einsum("mki,mkj->mij", WV, V)
        b = np.einsum("mki,mk->mi", WV, ys[idx])
        det = np.linalg.det(A)
        scale = np.einsum("mii->m", A) ** (degree + 1)
        singular = ~(np.abs(det) > 1e-12 * np.maximum(scale, 1e-300))
        if singular.any() and not fallback:
            bad = start + int(np.flatnonzero(singular)[0])
            raise ValueError(f"degenerate LOESS neighbourhood at evaluation index {bad}: "
                             f"too few distinct weighted points for degree {degree}")
        A[singular] = np.eye(degree + 1)
        b[singular] = 0.0
        fit = np.linalg.solve(A, b[..., None])[:, 0, 0]
        if singular.any():
            ws = w[singular]
            plain = tricube(u[singular])
            total = ws.sum(axis=1)
            ws = np.where(total[:, None] > 0, ws, plain)
            fit[singular] = (ws * ys[idx[singular]]).sum(axis=1) / ws.sum(axis=1)
        out[start : start + step] = fit
    return out


def loess_smooth(xs, ys, p=LoessParams(), x_eval=None, robustness=None):
    """Smooth ``ys`` against ``xs`` and evaluate at ``x_eval`` (default: ``xs``).

    Each evaluation point uses the ``ceil(span_fraction * n)`` nearest points
    (at least ``degree + 2``, since the farthest one gets zero weight),
    tricube weights on distances scaled by the farthest neighbour, and a
    weighted polynomial fit of the configured degree.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise ValueError("xs and ys must be 1-D arrays of equal length")
    n = xs.size
    if n < p.degree + 1:
        raise ValueError(f"need at least {p.degree + 1} points for degree {p.degree}")
    q = min(n, max(math.ceil(p.span_fraction * n), p.degree + 2))
    order = np.argsort(xs, kind="stable")
    rw = None if robustness is None else np.asarray(robustness, dtype=float)[order]
    if x_eval is None:
        fitted = loess_points(xs[order], ys[order], q, p.degree, robustness=rw)
        out = np.empty(n)
        out[order] = fitted
        return out
    return loess_points(xs[order], ys[order], q, p.degree, x_eval, rw)
