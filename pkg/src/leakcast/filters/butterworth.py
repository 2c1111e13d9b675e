"""Low-pass Butterworth design by bilinear transform, and its difference equation."""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

from .base import DecompositionResult


@dataclass(frozen=True)
class ButterworthDesign:
    """Digital low-pass ``H(z) = sum b_k z^-k / (1 + sum a_k z^-k)``.

    ``a`` holds a_1..a_n (the leading 1 is implicit), ``b`` holds b_0..b_n.
    """

    order: int
    cutoff_hz: float
    sample_rate_hz: float
    a: np.ndarray
    b: np.ndarray
    poles: np.ndarray

    @property
    def sample_period(self):
        return 1.0 / self.sample_rate_hz

    @property
    def denominator(self):
        return np.concatenate(([1.0], self.a))

    def response(self, freq_hz):
        """Complex frequency response at the given frequencies."""
        z_inv = np.exp(-2j * np.pi * np.asarray(freq_hz, dtype=float) / self.sample_rate_hz)
        k = np.arange(self.order + 1)
        powers = z_inv[..., None] ** k
        return (powers @ self.b) / (powers @ self.denominator)

    def is_stable(self):
        return bool(np.all(np.abs(self.poles) < 1.0))


def butterworth_design(order, cutoff_hz, sample_rate_hz):
    """Place the analog poles on the Butterworth circle, pre-warp, map with the bilinear transform.

    Pre-warping the analog cutoff to ``(2/T) tan(pi fc T)`` makes the
    digital magnitude at ``cutoff_hz`` exactly ``1/sqrt(2)``; the gain is set
    for unit response at DC.
    """
    order = int(order)
    if order < 1:
        raise ValueError("filter order must be at least 1")
    if not 0 < cutoff_hz < sample_rate_hz / 2:
        raise ValueError(f"cutoff {cutoff_hz} Hz must lie strictly between 0 and Nyquist "
                         f"({sample_rate_hz / 2} Hz)")
    T = 1.0 / sample_rate_hz
    warped = (2.0 / T) * np.tan(np.pi * cutoff_hz * T)
    k = np.arange(1, order + 1)
    s_poles = warped * np.exp(1j * np.pi * (2 * k + order - 1) / (2 * order))
    z_poles = (1 + s_poles * T / 2) / (1 - s_poles * T / 2)
    den = np.real(np.poly(z_poles))
    # all n analog zeros sit at infinity and map to z = -1
    num = np.array([comb(order, i) for i in range(order + 1)], dtype=float)
    num *= den.sum() / num.sum()
    design = ButterworthDesign(order, float(cutoff_hz), float(sample_rate_hz),
                               a=den[1:], b=num, poles=z_poles)
    if not design.is_stable():
        raise ValueError("designed filter is unstable")
    return design


def steady_state(design):
    """Transposed direct-form state reached after a long unit-step input."""
    a = design.denominator
    b = design.b
    gain = b.sum() / a.sum()
    tail = (b - a * gain)[1:]
    return np.cumsum(tail[::-1])[::-1]


def difference_equation(x, design, state=None):
    """Run ``y[t] = sum b_k x[t-k] - sum a_k y[t-k]`` in transposed direct form II."""
    x = np.asarray(x, dtype=float)
    a = design.a
    b = design.b
    n = design.order
    z = np.zeros(n) if state is None else np.array(state, dtype=float)
    y = np.empty_like(x)
    for t, xt in enumerate(x):
        yt = b[0] * xt + z[0]
        z[:-1] = b[1:-1] * xt - a[:-1] * yt + z[1:]
        z[-1] = b[-1] * xt - a[-1] * yt
        y[t] = yt
    return y


def _run(x, design):
    return difference_equation(x, design, steady_state(design) * x[0])


def butterworth_apply(s, d, zero_phase=True):
    """Low-pass ``s`` with design ``d``.

    Both passes start from the steady state for their first sample. The
    zero-phase mode pads with an odd reflection of ``3 * (order + 1)``
    samples at each end, filters forward, then backward.
    """
    if not d.is_stable():
        raise ValueError("refusing to apply an unstable design")
    x = np.asarray(getattr(s, "values", s), dtype=float)
    if not zero_phase:
        y = _run(x, d)
    else:
        pad = min(3 * (d.order + 1), x.size - 1)
        if pad > 0:
            head = 2 * x[0] - x[pad:0:-1]
            tail = 2 * x[-1] - x[-2 : -pad - 2 : -1]
            ext = np.concatenate((head, x, tail))
        else:
            ext = x
        y = _run(ext, d)
        y = _run(y[::-1], d)[::-1]
        y = y[pad : pad + x.size] if pad > 0 else y
    return DecompositionResult(trend=y, residual=x - y, filtered=y, method="butterworth",
                               info={"order": d.order, "cutoff_hz": d.cutoff_hz,
                                     "zero_phase": zero_phase})
