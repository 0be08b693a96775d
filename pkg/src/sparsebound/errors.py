"""
Exception and warning classes shared by every sparsebound module.

The CLI maps these onto exit codes (see cli.EXIT_CODES), so library code
should raise the most specific class that applies.
"""
import numpy as np


class SparseBoundError(Exception):
    """Base class for all errors raised by sparsebound"""
    pass


class DimensionError(SparseBoundError, ValueError):
    """Shapes or indices of the arguments do not fit together"""
    pass


class SingularMatrixError(SparseBoundError, np.linalg.LinAlgError):
    """A matrix that has to be positive definite is not (numerically)"""
    pass


class UnsupportedConfigurationError(SparseBoundError):
    """The requested combination of options has no implementation"""
    pass


class BudgetExceededError(SparseBoundError):
    """Exhaustive support enumeration would exceed the configured budget"""

    def __init__(self, required, budget, hint=''):
        self.required = required
        self.budget = budget
        message = f"{required} supports to enumerate, budget is {budget}"
        if hint:
            message = f"{message}. {hint}"
        super().__init__(message)


class IllConditionedError(SparseBoundError):
    """The oracle Gram matrix is too badly conditioned to be trusted"""

    def __init__(self, condition, usable_size, message='', partial=None):
        self.condition = condition
        self.usable_size = usable_size
        self.partial = partial
        super().__init__(message or
            f"Gram condition number {condition:.3e}; only {usable_size} test points usable")


class ConfigError(SparseBoundError):
    """Experiment configuration failed validation"""
    pass


class AccuracyWarning(UserWarning):
    """A numerical self-check (Richardson, two-form identity) did not pass"""
    pass
