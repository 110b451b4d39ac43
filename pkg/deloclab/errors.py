"""
Exception hierarchy shared by every laboratory module.

All errors raised on purpose derive from LabError so that the command line
front end can map them to exit codes:
- ConfigError -> 1 (validation)
- everything else -> 2 (runtime)
"""

from typing import Optional


class LabError(Exception):
    """Base class for all laboratory errors."""


class ConfigError(LabError, ValueError):
    """Invalid experiment configuration.

    Attributes:
        field (str, optional): Dotted path of the offending field
    """

    def __init__(self, message: str, field: Optional[str] = None):
        self.field = field
        self.message = message
        if field:
            message = f"{field}: {message}"
        super().__init__(message)

    def __reduce__(self):
        return (type(self), (self.message, self.field))


class DimensionError(LabError, ValueError):
    """Invalid dimension or mismatched lengths."""


class PreconditionError(LabError, ValueError):
    """An operation was called outside its documented preconditions."""


class DomainError(LabError, ValueError):
    """Argument outside the mathematical domain of a function."""


class ResolutionError(LabError):
    """Histogram bins too thin for the number of samples."""


class UnsupportedDimensionError(LabError):
    """Requested dimension is not supported by the estimator."""


class ExperimentError(LabError):
    """Runtime failure of an experiment, carrying the experiment context.

    Attributes:
        experiment (str): Name of the failing experiment or task
    """

    def __init__(self, experiment: str, message: str):
        self.experiment = experiment
        self.message = message
        super().__init__(f"[{experiment}] {message}")

    def __reduce__(self):
        return (type(self), (self.experiment, self.message))
