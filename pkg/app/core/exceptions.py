from typing import Optional

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_COMPUTATION = 2
EXIT_IO = 3


class EscapeKitError(Exception):
    """Base class for every error raised by the toolkit."""

    exit_code = EXIT_COMPUTATION


class MapDomainError(EscapeKitError, ValueError):
    """A map was evaluated outside its domain."""


class OrientationError(EscapeKitError, ValueError):
    """The Jacobian determinant is not positive at the evaluation point."""


class PreconditionError(EscapeKitError, ValueError):
    """An operation was called with inputs violating its precondition."""


class ComputationError(EscapeKitError):
    pass


class ConfigParseError(EscapeKitError, ValueError):
    exit_code = EXIT_VALIDATION

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(f"{prefix}{message}")


class ConfigValidationError(EscapeKitError, ValueError):
    exit_code = EXIT_VALIDATION

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")


def exit_code_for(error: BaseException) -> int:
    if isinstance(error, EscapeKitError):
        return error.exit_code
    if isinstance(error, OSError):
        return EXIT_IO
    return EXIT_COMPUTATION
