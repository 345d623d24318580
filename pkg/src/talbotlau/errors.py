"""Exception hierarchy."""


class TalbotLauError(Exception):
    """Base class for all package errors."""


class DomainError(TalbotLauError, ValueError):
    """An argument lies outside the domain of an operation."""


class NumericalError(TalbotLauError, ArithmeticError):
    """A numerical consistency check failed (e.g. a non-real fringe signal)."""


class DegenerateConfigurationError(NumericalError):
    """The configuration transmits nothing or has no meaningful signal."""


class EmptyAcceptanceError(TalbotLauError):
    """A Monte Carlo selection accepted no samples."""


class FitError(TalbotLauError):
    """A least-squares fringe fit is invalid or ill-posed."""


class DataError(TalbotLauError):
    """Input images or metadata are missing, corrupt or inconsistent."""


class ConfigError(TalbotLauError):
    """A run configuration failed to parse or validate."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
