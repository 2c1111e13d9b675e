"""Leakage-current series: ingestion, downsampling, splitting and windowing."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from .errors import DataError

RECORD_LENGTH = 96_800
RECORD_DOWNSAMPLE_FACTOR = 100
FAULT_LIMIT_AMPERES = 0.2


@dataclass(frozen=True)
class TimeSeries:
    """Uniformly sampled real-valued series.

    ``values`` is copied into a read-only float64 array on construction.
    """

    values: np.ndarray
    dt: float = 1.0
    t0: float = 0.0
    unit: str = "A"

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64).reshape(-1)
        if values.size == 0:
            raise DataError("time series must not be empty")
        if not np.all(np.isfinite(values)):
            bad = int(np.flatnonzero(~np.isfinite(values))[0])
            raise DataError(f"time series contains a non-finite value at index {bad}")
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise DataError(f"sample period must be positive, got {self.dt}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.values.size

    @property
    def times(self):
        return self.t0 + self.dt * np.arange(len(self))

    def with_values(self, values):
        """Same metadata, new samples."""
        return replace(self, values=values)


@dataclass(frozen=True)
class SplitSpec:
    input_size: int
    horizon: int
    test_fraction: float = 0.2

    def __post_init__(self):
        if self.input_size < 1:
            raise ValueError("input_size must be a positive integer")
        if self.horizon < 1:
            raise ValueError("horizon must be a positive integer")
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError("test_fraction must lie in (0, 1)")

    def check(self, length):
        if self.input_size + self.horizon > length:
            raise DataError(
                f"series of length {length} is too short for input_size={self.input_size} "
                f"and horizon={self.horizon}"
            )


@dataclass(frozen=True)
class FaultThreshold:
    limit: float = FAULT_LIMIT_AMPERES

    def __post_init__(self):
        if not self.limit > 0:
            raise ValueError("fault threshold must be positive")


def ingest_csv(path, column, *, delimiter=",", dt=1.0, unit="A"):
    """Read one numeric column of a headed CSV file into a :class:`TimeSeries`.

    Rows are numbered from 1 starting at the first data row (the header is
    not counted) in error messages.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"dataset file not found: {path}")
    values = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path} is empty") from None
        header = [h.strip() for h in header]
        if column not in header:
            raise DataError(f"column {column!r} not found in {path}; available: {header}")
        idx = header.index(column)
        for row_no, row in enumerate(reader, start=1):
            if not row:
                continue
            cell = row[idx].strip() if idx < len(row) else ""
            try:
                value = float(cell)
            except ValueError:
                raise DataError(f"non-numeric value {cell!r} in column {column!r} at row {row_no}") from None
            if not math.isfinite(value):
                raise DataError(f"non-finite value in column {column!r} at row {row_no}")
            values.append(value)
    if not values:
        raise DataError(f"column {column!r} in {path} has no data rows")
    return TimeSeries(np.asarray(values), dt=dt, unit=unit)


def write_csv(path, columns, *, delimiter=","):
    """Write equally long named columns to ``path``. Used for component exports."""
    names = list(columns)
    arrays = [np.asarray(columns[n], dtype=float) for n in names]
    n = {a.size for a in arrays}
    if len(n) > 1:
        raise ValueError("all columns must have the same length")
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, delimiter=delimiter, quoting=csv.QUOTE_MINIMAL)
        writer.writerow(names)
        for row in zip(*arrays):
            writer.writerow([repr(float(v)) for v in row])


def downsample(s, factor, method="mean"):
    """Reduce the sampling rate by an integer ``factor``.

    ``mean`` averages each block of ``factor`` samples, ``decimate`` keeps the
    first sample of each block. A tail shorter than one block is dropped so
    the output stays uniformly sampled.
    """
    if not isinstance(factor, (int, np.integer)) or factor < 1:
        raise ValueError(f"downsample factor must be a positive integer, got {factor!r}")
    if factor > len(s):
        raise ValueError(f"downsample factor {factor} exceeds series length {len(s)}")
    if factor == 1:
        return s
    n_blocks = len(s) // factor
    blocks = s.values[: n_blocks * factor].reshape(n_blocks, factor)
    if method == "mean":
        out = blocks.mean(axis=1)
    elif method == "decimate":
        out = blocks[:, 0].copy()
    else:
        raise ValueError(f"unknown downsample method {method!r}")
    return replace(s, values=out, dt=s.dt * factor)


def train_test_split(s, spec):
    """Chronological split; the test part gets ``floor(len * test_fraction)`` samples."""
    n = len(s)
    spec.check(n)
    n_test = int(math.floor(n * spec.test_fraction))
    if n_test < spec.horizon:
        raise DataError(
            f"test split of {n_test} samples is shorter than the horizon {spec.horizon}"
        )
    n_train = n - n_test
    if n_train < spec.input_size + spec.horizon:
        raise DataError(f"training split of {n_train} samples cannot hold a single window")
    train = replace(s, values=s.values[:n_train])
    test = replace(s, values=s.values[n_train:], t0=s.t0 + n_train * s.dt)
    return train, test


def window_count(length, input_size, horizon):
    return length - input_size - horizon + 1


def make_windows(s, input_size, horizon):
    """All stride-1 (input, target) pairs as two 2-D arrays.

    Accepts a :class:`TimeSeries` or a plain array.
    """
    values = s.values if isinstance(s, TimeSeries) else np.asarray(s, dtype=float)
    if input_size < 1 or horizon < 1:
        raise ValueError("input_size and horizon must be positive")
    count = window_count(values.size, input_size, horizon)
    if count < 1:
        raise DataError(
            f"series of length {values.size} cannot hold input_size={input_size} + horizon={horizon}"
        )
    view = np.lib.stride_tricks.sliding_window_view(values, input_size + horizon)
    return view[:, :input_size].copy(), view[:, input_size:].copy()


def fault_alarm(forecast, thr):
    """Index of the first forecast value strictly above ``thr.limit``, else None."""
    forecast = np.asarray(forecast, dtype=float)
    if forecast.size == 0:
        raise ValueError("forecast must not be empty")
    above = np.flatnonzero(forecast > thr.limit)
    return int(above[0]) if above.size else None


def synthetic_leakage(n=RECORD_LENGTH, seed=0, *, dt=1.0):
    """Surrogate for the laboratory leakage-current record.

    Monotone contamination trend (roughly 20 mA rising towards 180 mA),
    multiplicative noise with a slow correlated part and a white part, and
    rare positive discharge spikes.
    """
    rng = np.random.default_rng(seed)
    u = np.linspace(0.0, 1.0, n)
    trend = 0.02 + 0.16 * (0.6 * u + 0.4 * u**3)
    # AR(1) with ~2000-sample memory survives the 100x block mean as visible wander.
    phi = 1.0 - 1.0 / 2000.0
    shocks = rng.normal(0.0, math.sqrt(1.0 - phi**2), n)
    slow = lfilter([1.0], [1.0, -phi], shocks, zi=[phi * rng.normal()])[0]
    noise = 1.0 + 0.06 * slow + 0.08 * rng.normal(size=n)
    spikes = np.zeros(n)
    hits = rng.random(n) < 2e-4
    spikes[hits] = rng.exponential(0.3, hits.sum())
    # a discharge lasts a few hundred samples
    spikes = np.convolve(spikes, np.exp(-np.arange(300) / 60.0), mode="full")[:n]
    values = trend * noise + trend * spikes
    return TimeSeries(np.clip(values, 1e-4, None), dt=dt, unit="A")
