"""Leakage-current forecasting: decomposition filters, a time-aware attention
forecaster, TPE tuning and a benchmark harness."""

from .errors import ConfigError, DataError, LeakcastError, ModelError
from .filters import DecompositionResult, apply_filter
from .metrics import MetricsReport, StatsSummary, evaluate, summarize
from .series import FaultThreshold, SplitSpec, TimeSeries

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "DataError", "DecompositionResult", "FaultThreshold", "LeakcastError",
    "MetricsReport", "ModelError", "SplitSpec", "StatsSummary", "TimeSeries", "apply_filter",
    "evaluate", "summarize",
]
