"""Utility modules for the Chern marker laboratory"""

from .error_handler import (
    handle_errors, ErrorReporter, LabError,
    ValidationError, NumericalError, EigenvalueAtFermiLevel,
    DegenerateClusteringError, InsufficientDataError,
    EXIT_OK, EXIT_NUMERICAL, EXIT_INVALID_INPUT,
)

__all__ = [
    'handle_errors', 'ErrorReporter', 'LabError',
    'ValidationError', 'NumericalError', 'EigenvalueAtFermiLevel',
    'DegenerateClusteringError', 'InsufficientDataError',
    'EXIT_OK', 'EXIT_NUMERICAL', 'EXIT_INVALID_INPUT',
]
