"""
Error types for the SiNK Kriging toolkit
Each error carries the exit code the bench CLI reports for it
"""


class SinkError(Exception):
    """Base class for every error raised by this package"""

    exit_code = 3


class ConfigurationError(SinkError, ValueError):
    """Invalid settings: unsupported smoothness, bad bounds, unknown preset"""

    exit_code = 2


class InputError(SinkError, ValueError):
    """Invalid data: dimension mismatch, out-of-cube points, duplicates"""

    exit_code = 2


class NumericalError(SinkError, ArithmeticError):
    """A computation could not produce a trustworthy number"""

    exit_code = 3


class SingularModelError(NumericalError):
    """Covariance matrix could not be factorized even with maximum jitter"""


class NumericalConsistencyError(NumericalError):
    """A quantity left its mathematically admissible range beyond roundoff"""


class UnboundedPredictorError(NumericalError):
    """CMLE requested where rho is too small for a finite answer"""


class UndefinedLimitWeightError(NumericalError):
    """Limit Kriging weight 1/(k^T K^-1 1) is undefined or negative"""


class DegenerateConditioningError(NumericalError):
    """Conditioning on the target leaves a singular covariance (rho ~ 1)"""


class UndefinedRSquaredError(NumericalError):
    """R^2 requested for test truths with zero variance"""
