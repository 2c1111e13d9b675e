"""Exception hierarchy shared by the library and the command line."""


class LeakcastError(Exception):
    """Base class for all package errors."""

    exit_code = 4


class ConfigError(LeakcastError):
    """Invalid or incomplete configuration. Carries every violation found."""

    exit_code = 2

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class DataError(LeakcastError):
    """Missing, unreadable or malformed input data."""

    exit_code = 3


class ModelError(LeakcastError):
    """Numerical failure inside the forecaster (divergence, non-finite values)."""

    exit_code = 4
