"""Unified error handling for the Chern marker laboratory"""

import logging
from functools import wraps
from typing import Optional, Callable, Any


# Logger configuration
logger = logging.getLogger(__name__)

# Exit codes of the `lab` command line
EXIT_OK = 0
EXIT_NUMERICAL = 1
EXIT_INVALID_INPUT = 2


class LabError(Exception):
    """Base exception for laboratory-specific errors.

    Attributes:
        message: Human-readable error message
        title: Short error category used in log lines
        exit_code: Process exit code reported by the CLI
    """
    exit_code: int = EXIT_NUMERICAL

    def __init__(self, message: str, title: Optional[str] = None) -> None:
        """Initialize laboratory error.

        Args:
            message: Error description
            title: Optional custom category
        """
        super().__init__(message)
        self.title = title or "Error"


class ValidationError(LabError):
    """Invalid input: configuration, preconditions, window sizes."""
    exit_code = EXIT_INVALID_INPUT

    def __init__(self, message: str) -> None:
        super().__init__(message, "Validation error")


class NumericalError(LabError):
    """A numerical invariant was violated or a solver failed."""
    exit_code = EXIT_NUMERICAL

    def __init__(self, message: str) -> None:
        super().__init__(message, "Numerical error")


class EigenvalueAtFermiLevel(NumericalError):
    """The Fermi level sits on the discrete spectrum; the projector is ill-posed."""


class DegenerateClusteringError(NumericalError):
    """A projected-position cluster grew beyond the allowed size."""


class InsufficientDataError(ValidationError):
    """Not enough usable samples for a fit."""


class ErrorReporter:
    """Error reporting management.

    Provides centralized error logging for command functions.
    """

    @staticmethod
    def report_error(error: Exception, log_traceback: bool = True) -> None:
        """Log an error.

        Args:
            error: Exception to report
            log_traceback: Whether to log full traceback
        """
        if isinstance(error, LabError):
            message = f"{error.title}: {error}"
        else:
            # 予期しないエラー
            message = f"Unexpected error: {type(error).__name__}: {error}"

        if log_traceback:
            logger.error(message, exc_info=True)
        else:
            logger.error(message)


def exit_code_for(error: Exception) -> int:
    """Map an exception to the CLI exit code."""
    if isinstance(error, LabError):
        return error.exit_code
    return EXIT_NUMERICAL


def handle_errors(
    log_traceback: bool = True,
    return_on_error: Any = None
) -> Callable:
    """Unified error handling decorator.

    Catches and reports exceptions. When ``return_on_error`` is None the
    wrapper returns the exit code that matches the exception, which is what
    the CLI command functions want.

    Args:
        log_traceback: Whether to log full stack trace
        return_on_error: Value to return if error occurs (None: exit code)

    Returns:
        Decorator function

    Example:
        @handle_errors()
        def cmd_spectrum(config):
            ...
            return EXIT_OK
    """
    def decorator(func: Callable) -> Callable:
        @wraps(func)
        def wrapper(*args, **kwargs):
            try:
                return func(*args, **kwargs)
            except LabError as e:
                # ラボ定義エラー
                ErrorReporter.report_error(e, log_traceback and not isinstance(e, ValidationError))
                return e.exit_code if return_on_error is None else return_on_error
            except Exception as e:
                # 予期しないエラー
                ErrorReporter.report_error(e, log_traceback)
                return exit_code_for(e) if return_on_error is None else return_on_error

        return wrapper
    return decorator
