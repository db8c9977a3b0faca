"""Exception and warning types raised across the package."""

import contextlib
import warnings


class PapeError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(PapeError, ValueError):
    """Input violates a documented precondition."""


class SchemaError(ValidationError):
    """A dataset file does not match the expected column layout."""


class EmptyInputError(ValidationError):
    pass


class DegenerateTargetError(ValidationError):
    """A binary target contains only one class."""


class SingularFitError(PapeError, ArithmeticError):
    pass


class UndefinedMetricError(PapeError, ArithmeticError):
    """A metric cannot be computed on the given data (e.g. AUROC on a single class)."""


class SEUndefinedError(UndefinedMetricError):
    pass


class EstimationWarning(UserWarning):
    """Estimation ran but its output should be treated with caution.

    ``code`` is the short flag recorded next to an estimate.
    """

    code = "caution"


class UndefinedMetricWarning(EstimationWarning):
    """A zero-denominator ratio metric was reported as 0."""

    code = "undefined_metric"


class CoverageWarning(EstimationWarning):
    """Production inputs fall in regions the reference data barely covers."""

    code = "coverage"


class FallbackWarning(EstimationWarning):
    """An estimator could not run and fell back to the reference value."""

    code = "fallback"


class SmallSampleWarning(EstimationWarning):
    code = "small_sample"


@contextlib.contextmanager
def quiet():
    """Silence warnings inside the block."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        yield
