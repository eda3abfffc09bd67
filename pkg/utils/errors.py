"""Error hierarchy shared by every CaptionFlow package.

Each error carries the process exit code that ``main.py`` reports when the
error escapes a command.
"""


class CaptionFlowError(Exception):
    """Base class for all CaptionFlow failures."""

    exit_code = 1


class InvalidInputError(CaptionFlowError, ValueError):
    """An operation received arguments that violate its preconditions."""

    exit_code = 3


class ConfigError(CaptionFlowError):
    """A configuration value is unknown, malformed or out of range."""

    exit_code = 2

    def __init__(self, message: str, field: str = None):
        super().__init__(message)
        self.field = field


class DataLoadError(CaptionFlowError):
    """A manifest, feature file or caption file could not be read."""

    exit_code = 3

    def __init__(self, message: str, path: str = None):
        super().__init__(message)
        self.path = path


class NumericError(CaptionFlowError):
    """Training produced a non-finite value."""

    exit_code = 4


class ContractError(CaptionFlowError):
    """A verification harness found a violated contract."""

    exit_code = 4

    def __init__(self, message: str, offenders=None):
        super().__init__(message)
        self.offenders = list(offenders or [])
