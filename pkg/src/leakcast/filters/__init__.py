"""Denoising and decomposition filters with a single dispatch point.

``DEFAULTS`` is the one table of default settings used whenever a filter is
requested by name without explicit parameters.
"""

from __future__ import annotations

import numpy as np

from .base import DecompositionResult
from .butterworth import ButterworthDesign, butterworth_apply, butterworth_design
from .cf import CfParams, cf_filter
from .emd import EmdParams, emd_decompose
from .ewt import EwtBank, ewt_decompose
from .hp import HpParams, hp_filter
from .loess import LoessParams, loess_smooth
from .stl import mstl_decompose, stl_decompose

FILTER_NAMES = ("cf", "hp", "stl", "mstl", "ewt", "butterworth", "emd")

DEFAULTS = {
    "cf": {"low_period": 2.0, "high_period": 32.0, "window": 96, "symmetric": False},
    "hp": {"lamb": 1600.0},
    "stl": {"period": 24, "span_fraction": None, "degree": 1, "robust_iters": 0},
    "mstl": {"periods": [12, 24], "span_fraction": None, "degree": 1, "robust_iters": 1},
    "ewt": {"modes": 3, "boundaries": None, "transition_ratio": 0.2, "mirror": True},
    # cutoff as a fraction of the sample rate, so the setting is independent of dt
    "butterworth": {"order": 4, "cutoff_ratio": 0.05, "zero_phase": True},
    "emd": {"max_imfs": 10, "sift_tolerance": 0.2, "max_sift_iters": 50},
}


def resolve_params(name, params=None):
    """Defaults for ``name`` overlaid with ``params``; unknown keys raise."""
    if name == "original":
        if params:
            raise ValueError("the 'original' pass-through takes no parameters")
        return {}
    if name not in DEFAULTS:
        raise ValueError(f"unknown filter {name!r}; choose from {('original',) + FILTER_NAMES}")
    merged = dict(DEFAULTS[name])
    for key, value in (params or {}).items():
        if key not in merged:
            raise ValueError(f"unknown parameter {key!r} for filter {name!r}")
        merged[key] = value
    return merged


def _loess(opts):
    if opts["span_fraction"] is None:
        return None
    return LoessParams(opts["span_fraction"], opts["degree"])


def apply_filter(name, s, params=None):
    """Run filter ``name`` on ``s`` (a TimeSeries or array) and return its decomposition."""
    opts = resolve_params(name, params)
    y = np.asarray(getattr(s, "values", s), dtype=float)
    if name == "original":
        return DecompositionResult(trend=y.copy(), filtered=y.copy(), method="original")
    if name == "cf":
        return cf_filter(y, CfParams(**opts))
    if name == "hp":
        return hp_filter(y, HpParams(**opts))
    if name == "stl":
        return stl_decompose(y, opts["period"], _loess(opts), robust_iters=opts["robust_iters"])
    if name == "mstl":
        return mstl_decompose(y, opts["periods"], _loess(opts), robust_iters=opts["robust_iters"])
    if name == "ewt":
        b = opts["boundaries"]
        return ewt_decompose(y, EwtBank(opts["modes"], None if b is None else tuple(b),
                                        opts["transition_ratio"], opts["mirror"]))
    if name == "butterworth":
        fs = 1.0 / getattr(s, "dt", 1.0)
        design = butterworth_design(opts["order"], opts["cutoff_ratio"] * fs, fs)
        return butterworth_apply(y, design, opts["zero_phase"])
    return emd_decompose(y, EmdParams(**opts))


__all__ = [
    "DEFAULTS", "FILTER_NAMES", "ButterworthDesign", "CfParams", "DecompositionResult",
    "EmdParams", "EwtBank", "HpParams", "LoessParams", "apply_filter", "butterworth_apply",
    "butterworth_design", "cf_filter", "emd_decompose", "ewt_decompose", "hp_filter",
    "loess_smooth", "mstl_decompose", "resolve_params", "stl_decompose",
]
