"""Point-forecast error metrics and distribution summaries."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

SMAPE_EPS = 1e-15
REPORT_COLUMNS = ("rmse", "mae", "mape", "smape", "n")
SUMMARY_FIELDS = ("mean", "median", "mode", "range", "std_dev", "p25", "p50", "p75", "iqr",
                  "skewness", "kurtosis")


@dataclass(frozen=True)
class MetricsReport:
    rmse: float
    mae: float
    mape: float
    smape: float
    n: int
    mape_excluded: int = 0

    def row(self):
        """Values in the fixed CSV column order."""
        return [getattr(self, c) for c in REPORT_COLUMNS]

    def as_dict(self):
        return asdict(self)


def evaluate(actual, forecast, *, conventional_smape=False):
    """RMSE, MAE, MAPE (%) and SMAPE (%) of ``forecast`` against ``actual``.

    SMAPE uses the denominator ``|y + y_hat| / 2`` unless
    ``conventional_smape`` selects ``(|y| + |y_hat|) / 2``. Points with a zero
    actual value are left out of MAPE and counted in ``mape_excluded``.
    """
    y = np.asarray(actual, dtype=float).ravel()
    f = np.asarray(forecast, dtype=float).ravel()
    if y.size != f.size:
        raise ValueError(f"actual has {y.size} values but forecast has {f.size}")
    if y.size == 0:
        raise ValueError("cannot evaluate empty sequences")
    err = y - f
    abs_err = np.abs(err)
    rmse = math.sqrt(float(np.mean(err**2)))
    mae = float(np.mean(abs_err))
    nonzero = y != 0
    excluded = int(y.size - nonzero.sum())
    mape = 100.0 * float(np.mean(abs_err[nonzero] / np.abs(y[nonzero]))) if nonzero.any() else float("nan")
    denom = (np.abs(y) + np.abs(f)) / 2 if conventional_smape else np.abs(y + f) / 2
    smape = 100.0 * float(np.mean(abs_err / np.maximum(denom, SMAPE_EPS)))
    return MetricsReport(rmse, mae, mape, smape, int(y.size), excluded)


@dataclass(frozen=True)
class StatsSummary:
    mean: float
    median: float
    mode: float
    range: float
    std_dev: float
    p25: float
    p50: float
    p75: float
    iqr: float
    skewness: float
    kurtosis: float

    def as_dict(self):
        return asdict(self)


def histogram_mode(samples):
    """Midpoint of the densest Freedman-Diaconis histogram bin."""
    x = np.asarray(samples, dtype=float)
    lo, hi = x.min(), x.max()
    if hi == lo:
        return float(lo)
    q75, q25 = np.percentile(x, [75, 25])
    width = 2.0 * (q75 - q25) / np.cbrt(x.size)
    bins = int(np.ceil((hi - lo) / width)) if width > 0 else 1
    bins = max(1, min(bins, x.size))
    counts, edges = np.histogram(x, bins=bins, range=(lo, hi))
    k = int(np.argmax(counts))
    return float(0.5 * (edges[k] + edges[k + 1]))


def summarize(samples, *, excess_kurtosis=False):
    """The eleven summary statistics reported for repeated runs.

    Standard deviation uses n - 1; skewness and kurtosis are the
    standardised third and fourth central moments (population form), with
    kurtosis 3 for a normal unless ``excess_kurtosis``. A constant sample has
    skewness 0 and kurtosis 0 by convention.
    """
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    if x.size < 2:
        raise ValueError("summarize needs at least 2 samples")
    mean = float(np.mean(x))
    dev = x - mean
    m2 = float(np.mean(dev**2))
    if m2 > 0:
        skew = float(np.mean(dev**3)) / m2**1.5
        kurt = float(np.mean(dev**4)) / m2**2 - (3.0 if excess_kurtosis else 0.0)
    else:
        skew, kurt = 0.0, 0.0
    p25, p50, p75 = (float(v) for v in np.percentile(x, [25, 50, 75]))
    return StatsSummary(
        mean=mean, median=p50, mode=histogram_mode(x), range=float(x[-1] - x[0]),
        std_dev=float(np.std(x, ddof=1)), p25=p25, p50=p50, p75=p75, iqr=p75 - p25,
        skewness=skew, kurtosis=kurt,
    )
