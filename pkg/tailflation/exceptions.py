from __future__ import annotations

from typing import Optional, Sequence


class TailflationError(Exception):
    """
    Base class for all errors raised by tailflation
    """
    exit_code = 1


class ConfigurationError(TailflationError):
    """
    Raised when a study or simulation is configured with invalid or inconsistent parameters
    """
    exit_code = 2


class DataError(TailflationError):
    """
    Raised when the input data cannot support the requested operation
    """
    exit_code = 3


class NumericalError(TailflationError):
    """
    Raised when a numerical procedure fails (singular systems, degenerate fits, solver failures)
    """
    exit_code = 4


class ExplosiveConfigurationError(ConfigurationError):
    """
    Raised when a simulated process diverges or is configured to be nonstationary
    """


class IngestError(DataError):
    """
    Raised when a CSV file does not match the expected schema
    """


class DomainError(DataError):
    """
    Raised when a transformation receives a value outside of its domain (e.g. the log of a non-positive level)
    """

    def __init__(self, message: str, period: object = None):
        super().__init__(message)
        self.period = period


class EmptySeriesError(DataError):
    """
    Raised when an operation would produce a series with no observations
    """


class UnknownSeriesError(DataError, KeyError):
    """
    Raised when a series name is not present in a frame
    """

    def __str__(self):
        return Exception.__str__(self)


class SmallSampleError(DataError):
    """
    Raised when too few rows remain after alignment or filtering
    """

    def __init__(self, message: str, n: int):
        super().__init__(message)
        self.n = n


class UndefinedCorrelationError(DataError):
    """
    Raised when a correlation is undefined, typically because an input is constant
    """


class InsufficientDataError(DataError):
    """
    Raised when a design has no more rows than columns
    """


class SingularDesignError(NumericalError):
    """
    Raised when a design matrix is rank deficient
    """

    def __init__(self, message: str, dependent_columns: Sequence[str] = ()):
        super().__init__(message)
        self.dependent_columns = tuple(dependent_columns)


class SolverError(NumericalError):
    """
    Raised when the linear programming backend fails or returns an uncertified solution
    """


class BandwidthError(NumericalError):
    """
    Raised when no admissible bandwidth exists for the quantile level and sample size
    """


class SingularHessianError(NumericalError):
    """
    Raised when the kernel estimate of the sparsity matrix is numerically singular
    """


class CovarianceError(NumericalError):
    """
    Raised when a covariance estimate cannot produce standard errors
    """


class PerfectFitError(NumericalError):
    """
    Raised when a fit has zero loss, so that an information criterion is undefined
    """


class SelectionError(NumericalError):
    """
    Raised when every candidate subset failed to fit
    """


class StageError(TailflationError):
    """
    Raised by the study pipeline when one of its stages fails. The original error is chained as the cause.
    """

    def __init__(self, stage: str, cause: BaseException, tau: Optional[float] = None):
        where = f'stage {stage!r}' if tau is None else f'stage {stage!r} at tau={tau:g}'
        super().__init__(f'{where} failed: {cause}')
        self.stage = stage
        self.tau = tau
        self.cause = cause

    @property
    def exit_code(self) -> int:  # type: ignore[override]
        return getattr(self.cause, 'exit_code', 1)
