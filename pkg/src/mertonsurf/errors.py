"""Error hierarchy shared across the toolkit.

Every error carries a ``category`` consumed by the CLI to pick an exit
code: usage/config -> 1, data -> 2, numerical -> 3, io -> 4.
"""

from __future__ import annotations


class ToolkitError(Exception):
    """Base class for all toolkit errors."""

    category = "data"


class ConfigError(ToolkitError):
    """Invalid configuration or command usage."""

    category = "usage"


class DataError(ToolkitError):
    """Malformed, missing, or inconsistent input data."""

    category = "data"


class SchemaError(DataError):
    """Input file does not match the documented column schema."""


class InsufficientDataError(DataError):
    """Fewer usable observations than the configured window requires."""


class DependencyError(DataError):
    """A prerequisite artifact (e.g. a calibrated surface) is missing."""


class NumericalError(ToolkitError):
    """Numerical failure such as an infeasible calibration."""

    category = "numerical"


class ArbitrageError(ValueError):
    """Inputs violate a static no-arbitrage bound."""


class NegativePriceError(NumericalError):
    """Arithmetic-return step would push the lattice to a non-positive price."""


class RiskNeutralInfeasibleError(NumericalError):
    """Risk-neutral up probability left [0, 1]; carries the offending value."""

    def __init__(self, q: float, message: str | None = None):
        self.q = q
        super().__init__(message or f"risk-neutral probability q={q} outside [0, 1]")


class CalibrationInfeasibleError(NumericalError):
    """No feasible point exists anywhere on the calibration search interval."""


class NanObjectiveError(NumericalError):
    """Objective returned NaN; carries the offending abscissa."""

    def __init__(self, abscissa: float):
        self.abscissa = abscissa
        super().__init__(f"objective returned NaN at x={abscissa}")


class OutputError(ToolkitError):
    """Failure writing an output artifact."""

    category = "io"
