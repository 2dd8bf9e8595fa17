"""Exception types shared across the library."""


class SpinMixError(Exception):
    """Base class for all library errors."""


class InvalidInstanceError(SpinMixError):
    """An instance, graph, or pinning violates a structural invariant."""


class InfeasiblePinningError(SpinMixError):
    """A pinning (or recursion input) admits no feasible extension."""


class CapExceededError(SpinMixError):
    """A state-space or support cap would be exceeded by an exact computation."""


class GenerationError(SpinMixError):
    """Random instance generation failed within its retry budget."""


class ErgodicityError(SpinMixError):
    """The single-site dynamics is not guaranteed ergodic for this instance."""


class DepthCapError(SpinMixError):
    """The coupling recursion exceeded its depth cap."""


class DomainError(SpinMixError):
    """An argument lies outside the mathematical domain of a map."""


class ParameterError(SpinMixError):
    """Parameters violate the preconditions of a formula or scheme."""


class InsufficientDataError(SpinMixError):
    """Not enough data points for a fit."""


class SearchCapError(SpinMixError):
    """A parameter search exhausted its budget without success."""


class NotForestError(SpinMixError):
    """An operation requiring a forest was applied to a cyclic graph."""
