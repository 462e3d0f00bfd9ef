"""Exception hierarchy shared across the package."""


class StfrontierError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(StfrontierError):
    """Invalid inputs: broken invariants, out-of-range parameters, bad configs."""


class DataError(StfrontierError):
    """Malformed or inconsistent data files (CSV/JSON ingestion)."""


class EstimationError(StfrontierError):
    """Numerical failure while fitting: rank deficiency, explosive estimates,
    degenerate responses."""


class BootstrapError(StfrontierError):
    """Failure inside a bootstrap procedure (sieve generation or resampling)."""
