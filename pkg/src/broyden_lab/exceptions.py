"""Exception types raised by the solver library."""


class BroydenLabError(Exception):
    """Base class for all library errors."""


class SingularMatrix(BroydenLabError):
    """A matrix that must be inverted is (numerically) singular."""


class NonConvergence(BroydenLabError):
    """An inner iterative routine did not reach its tolerance."""


class ZeroDirection(BroydenLabError):
    """A rank-one update was requested along a vanishing direction."""


class DegenerateUpdate(BroydenLabError):
    """The Sherman-Morrison denominator vanished; the updated matrix would be singular."""


class DomainError(BroydenLabError):
    """An iterate left the domain on which the problem is defined."""


class PoleEncountered(DomainError):
    """H-equation denominator hit (or came within tolerance of) zero."""


class ThresholdNotMet(BroydenLabError):
    """A bound was evaluated below the iteration count at which it is valid."""

    def __init__(self, min_k, message=None):
        self.min_k = min_k
        super().__init__(message or f"bound valid only for k >= {min_k}")


class Infeasible(BroydenLabError):
    """Initial-condition constants violate the feasibility requirement."""


class OutOfDomain(BroydenLabError):
    """Argument outside the region where a closed-form bound applies."""
