"""Exception hierarchy shared across the calibration library.

Every error raised on purpose derives from :class:`RppError`, so callers can
catch one base class at the boundary (the CLI does exactly that) while tests
can pin down the specific failure mode.
"""


class RppError(Exception):
    """Base class for all library errors."""


class ParamError(RppError):
    """An argument violates a documented precondition (alpha <= 1, var <= 0, ...)."""


class DomainError(RppError):
    """A divergence or bound is undefined for the given parameters.

    For order-alpha Gaussian divergences this means the combined variance
    (1 - alpha) * var_p + alpha * var_q is not strictly positive.
    """


class ConvergenceError(RppError):
    """An iterative routine exhausted its budget without stabilising."""


class NonMonotoneDetected(RppError):
    """The mixture divergence bound increased where it must decrease.

    The bound is a log-sum-exp of terms that are each non-increasing in the
    noise variance, so this firing indicates a numerical breakdown rather
    than an expected state; it is raised instead of silently re-bracketing.
    """


class MarginalError(RppError):
    """A transport plan's row or column sums do not match the mixture weights."""


class DataError(RppError):
    """Base class for dataset ingestion problems."""


class FileError(DataError):
    """The dataset file is missing or unreadable."""


class SchemaError(DataError):
    """The dataset header or a cell does not match the declared schema."""


class EmptySecret(DataError):
    """No usable rows matched one of the two secret values."""


class EmptyData(DataError):
    """An operation that needs samples received none."""


class TooFewSamples(DataError):
    """An operation received fewer samples than its contract requires."""


class ConfigError(RppError):
    """A CLI or sweep configuration is invalid (reported before any work)."""
