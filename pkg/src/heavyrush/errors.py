"""Exception types shared across the package."""


class HeavyRushError(Exception):
    """Base class for all errors raised by this package."""


class IndexOutOfRangeError(HeavyRushError):
    """An area index falls outside [0, n)."""


class SelfLoopError(HeavyRushError):
    """An edge connects an area to itself."""


class IsolatedAreaError(HeavyRushError):
    """An operation requires every area to have at least one neighbour."""


class NonPositiveKappaError(HeavyRushError):
    """A scaling component kappa_i was zero or negative."""


class NotPositiveDefiniteError(HeavyRushError):
    """A matrix required to be positive definite failed factorization."""


class GradientUnavailableError(HeavyRushError):
    """Gradient requested where the target density is -inf."""


class InitializationFailure(HeavyRushError):
    """No finite starting point found after the configured number of attempts."""


class InsufficientDrawsError(HeavyRushError):
    """Too few draws (or chains) for the requested statistic."""


class KappaAbsentError(HeavyRushError):
    """Outlier detection requested on a fit without scaling components."""


class EmptyMaskError(HeavyRushError):
    """An aggregation mask selected no cells."""


class DataError(HeavyRushError):
    """Base class for ingestion problems; message names the offending row."""


class MissingColumnError(DataError):
    pass


class NonContiguousIndexError(DataError):
    pass


class NegativeCountError(DataError):
    pass


class ZeroPopulationError(DataError):
    pass


class ScenarioError(HeavyRushError):
    """A scenario document failed schema validation; message carries the JSON pointer."""
