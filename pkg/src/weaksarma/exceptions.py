"""Exception hierarchy shared across the package."""


class WeakSarmaError(Exception):
    """Base class for all package-specific errors."""


class NonStationarySpecError(WeakSarmaError):
    """Model polynomials have a zero on or inside the unit disk."""


class BoundarySolutionError(WeakSarmaError):
    """Optimizer terminated at the admissibility boundary."""


class RankDeficiencyError(WeakSarmaError):
    """An information matrix is singular or not positive definite."""


class DegenerateSeriesError(WeakSarmaError):
    """Series has zero variance, so autocorrelations are undefined."""


class NotApplicableError(WeakSarmaError):
    """Requested test configuration is outside its domain of validity."""


class UnstableVarError(WeakSarmaError):
    """VAR spectral estimate is numerically unstable (near-unit roots)."""


class NonPsdEstimateError(WeakSarmaError):
    """Estimated covariance matrix has a materially negative eigenvalue."""


class NumericalFailureError(WeakSarmaError):
    """A numerical routine (quadrature, bisection) failed to converge."""


class DegenerateNormalizerError(WeakSarmaError):
    """Self-normalization matrix is singular."""


class ExperimentIntegrityError(WeakSarmaError):
    """Too many replications failed for the experiment to be trusted."""


class SilsoParseError(WeakSarmaError):
    """Malformed input data file."""

    def __init__(self, message, line_number=None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class MissingDataError(WeakSarmaError):
    """Input file contains missing-value sentinels in the requested range."""
