from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class DecompositionResult:
    """Additive split of a series into trend, seasonal components and residual.

    ``filtered`` is the channel handed to the forecaster; it is always one of
    the trend-like parts of the decomposition.
    """

    trend: np.ndarray
    seasonals: list = field(default_factory=list)
    residual: np.ndarray = None
    filtered: np.ndarray = None
    method: str = ""
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.trend = np.asarray(self.trend, dtype=float)
        n = self.trend.size
        self.seasonals = [np.asarray(c, dtype=float) for c in self.seasonals]
        if self.residual is None:
            self.residual = np.zeros(n)
        self.residual = np.asarray(self.residual, dtype=float)
        if self.filtered is None:
            self.filtered = self.trend
        self.filtered = np.asarray(self.filtered, dtype=float)
        for name, arr in self._named():
            if arr.size != n:
                raise ValueError(f"component {name} has length {arr.size}, expected {n}")

    def _named(self):
        yield "trend", self.trend
        for j, c in enumerate(self.seasonals, start=1):
            yield f"seasonal_{j}", c
        yield "residual", self.residual
        yield "filtered", self.filtered

    def reconstruct(self):
        total = self.trend + self.residual
        for c in self.seasonals:
            total = total + c
        return total

    def columns(self):
        """Ordered mapping of component name to values, for CSV export."""
        return dict(self._named())
