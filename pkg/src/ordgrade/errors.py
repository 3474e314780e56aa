"""Exception hierarchy shared by the library and the CLI.

Each class carries the process exit code the CLI maps it to.
"""


class OrdgradeError(Exception):
    exit_code = 1


class InvalidInputError(OrdgradeError, ValueError):
    exit_code = 2


class InvalidParameterError(OrdgradeError, ValueError):
    exit_code = 2


class ConfigError(OrdgradeError, ValueError):
    exit_code = 2


class InvalidLabelError(OrdgradeError, ValueError):
    exit_code = 3


class DataValidationError(OrdgradeError, ValueError):
    """A record failed schema validation; ``line`` is 1-based when known."""

    exit_code = 3

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class IncompatibleModelError(OrdgradeError, ValueError):
    exit_code = 3


class TrainingDivergedError(OrdgradeError, ArithmeticError):
    """Raised when a training loss goes non-finite. Holds the partial trace."""

    exit_code = 5

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace
