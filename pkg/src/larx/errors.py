"""Exception hierarchy with stable machine-readable error codes.

Every error raised by the library carries a ``code`` string that the CLI
serializes into its error JSON, so callers can dispatch on codes rather
than message text.
"""

from __future__ import annotations


class LarxError(Exception):
    """Base class for all library errors."""

    code = "error"

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


class StructureError(LarxError):
    """Block structures or matrix dimensions are incompatible."""

    code = "structure_error"


class DataError(LarxError):
    """Malformed input data (CSV parse failures, bad dates, bad levels)."""

    code = "data_error"


class SpecError(LarxError):
    """Model specification is internally inconsistent or incomplete."""

    code = "spec_error"


class DegenerateSampleError(LarxError):
    """Sample too small or a column carries no variance."""

    code = "degenerate_sample"


class DegenerateConstraintError(LarxError):
    """Constraint configuration makes a multiplier system singular."""

    code = "degenerate_constraint"


class SingularMultiplierError(LarxError):
    """The dependent scaling multiplier vanished; no valid update exists."""

    code = "singular_multiplier"


class InsufficientHistoryError(LarxError):
    """Requested lags exceed the available sample."""

    code = "insufficient_history"


class EmptyRunError(LarxError):
    """A rolling evaluation produced no usable forecast windows."""

    code = "empty_run"


class MetricError(LarxError):
    """A reported metric is undefined for the given inputs."""

    code = "metric_error"


class NumericalError(LarxError):
    """A numerical routine produced an invalid result."""

    code = "numerical_error"
