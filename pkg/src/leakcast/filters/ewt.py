"""Empirical wavelet transform with Meyer-type masks on a data-driven partition."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import DecompositionResult

PEAK_FLOOR = 1e-9


@dataclass(frozen=True)
class EwtBank:
    """Partition of [0, pi] into ``modes`` bands.

    ``boundaries`` (radians per sample, strictly increasing inside (0, pi))
    are detected from the spectrum when left as None.
    """

    modes: int = 3
    boundaries: tuple | None = None
    transition_ratio: float = 0.2
    mirror: bool = True

    def __post_init__(self):
        if self.modes < 1:
            raise ValueError("EWT needs at least one mode")
        if not 0 < self.transition_ratio <= 0.5:
            raise ValueError("transition_ratio must lie in (0, 0.5]")
        if self.boundaries is not None:
            b = np.asarray(self.boundaries, dtype=float)
            if b.size != self.modes - 1:
                raise ValueError(f"{self.modes} modes need {self.modes - 1} boundaries, got {b.size}")
            if np.any(np.diff(b) <= 0):
                raise ValueError("EWT boundaries must be strictly increasing")
            if b.size and (b[0] <= 0 or b[-1] >= np.pi):
                raise ValueError("EWT boundaries must lie strictly inside (0, pi)")
            object.__setattr__(self, "boundaries", tuple(float(v) for v in b))


def detect_boundaries(x, modes):
    """Midpoints between the dominant peaks of the one-sided magnitude spectrum.

    The DC bin always anchors the lowest band; the other ``modes - 1`` peaks
    are the largest interior local maxima that rise above ``PEAK_FLOOR``
    times the spectrum maximum.
    """
    if modes == 1:
        return ()
    mag = np.abs(np.fft.rfft(x))
    n = x.size
    omega = 2 * np.pi * np.arange(mag.size) / n
    top = mag.max()
    interior = np.flatnonzero((mag[1:-1] > mag[:-2]) & (mag[1:-1] >= mag[2:])) + 1
    if n % 2 == 0 and mag.size > 1 and mag[-1] > mag[-2]:
        interior = np.append(interior, mag.size - 1)
    interior = interior[mag[interior] > PEAK_FLOOR * top] if top > 0 else interior[:0]
    if interior.size < modes - 1:
        raise ValueError(f"requested {modes} modes but only {interior.size + 1} spectral peaks "
                         "were detected")
    strongest = interior[np.argsort(-mag[interior], kind="stable")[: modes - 1]]
    peaks = np.concatenate(([0.0], np.sort(omega[strongest])))
    return tuple(0.5 * (peaks[:-1] + peaks[1:]))


def transition_widths(boundaries, ratio):
    """Half-width of the transition around each boundary."""
    edges = np.concatenate(([0.0], boundaries, [np.pi]))
    seg = np.diff(edges)
    return ratio * np.minimum(seg[:-1], seg[1:])


def band_masks(omega, boundaries, ratio):
    """Scaling mask followed by one wavelet mask per upper band, on ``omega`` in [0, pi].

    Around boundary w_k the lower band rolls off as cos(pi/2 * u) and the
    upper band rises as sin(pi/2 * u), with u running 0..1 across
    [w_k - d_k, w_k + d_k]. Squares of adjacent masks therefore sum to one.
    """
    omega = np.abs(omega)
    b = np.asarray(boundaries, dtype=float)
    d = transition_widths(b, ratio)

    def rise(k):
        u = np.clip((omega - (b[k] - d[k])) / (2 * d[k]), 0.0, 1.0)
        return np.sin(0.5 * np.pi * u)

    def fall(k):
        u = np.clip((omega - (b[k] - d[k])) / (2 * d[k]), 0.0, 1.0)
        return np.cos(0.5 * np.pi * u)

    if b.size == 0:
        return [np.ones_like(omega)]
    masks = [fall(0)]
    for k in range(b.size):
        m = rise(k)
        if k + 1 < b.size:
            m = m * fall(k + 1)
        masks.append(m)
    return masks


def ewt_decompose(s, bank=EwtBank()):
    """Split ``s`` into the low-frequency scaling component and ``modes - 1`` wavelet bands.

    Each component is the analysis-synthesis pair ``F^-1[x_hat * mask^2]``,
    so the components sum back to the input up to rounding; whatever remains
    is stored as the residual. ``filtered`` is the scaling component.

    With ``bank.mirror`` the series is extended by its time reversal before
    the transform, which removes the jump a trending series would otherwise
    have at the periodic wrap-around.
    """
    x = np.asarray(getattr(s, "values", s), dtype=float)
    n = x.size
    if n < 8:
        raise ValueError(f"EWT needs at least 8 samples, got {n}")
    work = np.concatenate((x, x[::-1])) if bank.mirror else x
    m_len = work.size
    boundaries = bank.boundaries if bank.boundaries is not None else detect_boundaries(work, bank.modes)
    spectrum = np.fft.rfft(work)
    omega = 2 * np.pi * np.arange(spectrum.size) / m_len
    masks = band_masks(omega, boundaries, bank.transition_ratio)
    comps = [np.fft.irfft(spectrum * m**2, n=m_len)[:n] for m in masks]
    low, waves = comps[0], comps[1:]
    residual = x - low - sum(waves, np.zeros(n))
    return DecompositionResult(trend=low, seasonals=waves, residual=residual, filtered=low,
                               method="ewt", info={"boundaries": list(boundaries)})
