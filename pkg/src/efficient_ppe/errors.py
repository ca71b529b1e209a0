"""Exception hierarchy shared by the analysis modules."""

from __future__ import annotations


class PPEError(Exception):
    """Base class for every error raised by this package."""


class EmptyActionSpace(PPEError):
    pass


class NonUniqueArgmax(PPEError):
    pass


class SingularFrontier(PPEError):
    pass


class NonPositiveWeight(PPEError):
    pass


class DimensionMismatch(PPEError):
    pass


class DegenerateCell(PPEError):
    pass


class ParameterConstraintViolated(PPEError):
    pass


class NotBinarySignal(PPEError):
    """Raised when a two-signal analysis is asked of a multi-signal game."""


class LabelingViolation(PPEError):
    """A profitable deviation fails to raise the bad-signal probability."""

    def __init__(self, message: str, i: int, j: int, action: object):
        super().__init__(message)
        self.i = i
        self.j = j
        self.action = action


class InfeasibleMu(PPEError):
    """The floor vector leaves no room on the efficient hyperplane."""

    def __init__(self, message: str, mu=None, weighted_sum: float | None = None):
        super().__init__(message)
        self.mu = mu
        self.weighted_sum = weighted_sum


class SingletonSet(InfeasibleMu):
    """The floor vector pins the payoff set to a single point."""


class DegenerateDenominator(PPEError):
    pass


class NonpositiveDenominator(PPEError):
    pass


class FloorBreach(PPEError):
    pass


class ConditionsNotMet(PPEError):
    """An equilibrium configuration fails one of the sufficiency conditions."""


class UnsupportedDimension(PPEError):
    pass


class TruncationTooCoarse(PPEError):
    pass


class ConfigError(PPEError):
    """Malformed or inconsistent configuration input."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class UnknownSweepParameter(ConfigError):
    pass
