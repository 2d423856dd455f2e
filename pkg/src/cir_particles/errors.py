"""Exception types shared across the package."""

__all__ = [
    "BadK",
    "CoincidentCoordinates",
    "ConfigError",
    "DomainError",
    "NoInvariantLaw",
    "NotEvaluable",
    "NumericalFailure",
    "RegimeMismatch",
    "TooFewSamples",
    "ZeroCoordinate",
]


class CoincidentCoordinates(ValueError):
    """Two coordinates are exactly equal, so a pairwise term is singular."""


class ZeroCoordinate(ValueError):
    """A root coordinate is exactly zero where 1/x is required."""


class DomainError(ValueError):
    """Input lies outside the open ordered cone 0 < x1 < ... < xn."""


class BadK(ValueError):
    """Partial-sum index k is outside 1..n."""


class NotEvaluable(ValueError):
    """Stationary density requested outside gamma > 0, kappa > 0."""


class NoInvariantLaw(ValueError):
    """CIR process has no invariant distribution (no mean reversion)."""


class RegimeMismatch(ValueError):
    """Requested experiment needs a regime the parameters do not satisfy."""


class TooFewSamples(ValueError):
    """Statistical routine called with fewer samples than its contract allows."""


class ConfigError(ValueError):
    """Invalid simulation or experiment configuration; message names the field."""


class NumericalFailure(RuntimeError):
    """Non-finite values appeared during time stepping."""
