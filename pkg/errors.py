"""Exception hierarchy shared by the library and the CLI.

Library code raises these and never exits; main.py maps ``exit_code``
onto the process exit status.
"""


class AnalysisError(Exception):
    """Base class for every error raised by this package."""
    exit_code = 1


class SpecError(AnalysisError):
    """Malformed function spec, empty corpus or unreadable function JSON."""
    exit_code = 2


class ParameterError(AnalysisError):
    """A numeric argument is outside its admissible range."""
    exit_code = 2


class DomainError(ParameterError):
    """A point or time lies outside the domain of the operation."""


class TruncationError(DomainError):
    """A path was queried before its truncation time eps."""


class DegenerateMeasureError(ParameterError):
    """A biased measure with some p_i in {0, 1}."""


class ConfigurationError(AnalysisError):
    """Inconsistent run configuration."""
    exit_code = 2


class CapacityError(AnalysisError):
    """Dimension beyond the exact or Monte Carlo limit."""
    exit_code = 3


class ReportIOError(AnalysisError):
    """Report or trace file could not be read or written."""
    exit_code = 4
