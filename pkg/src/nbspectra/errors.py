"""Exception hierarchy shared by every module."""


class NBSpectraError(Exception):
    """Base class for all library errors."""


class GraphError(NBSpectraError, ValueError):
    pass


class ParseError(GraphError):
    pass


class DisconnectedGraph(GraphError):
    pass


class SelfLoop(GraphError):
    pass


class DuplicateEdge(GraphError):
    pass


class DegreeTooLow(GraphError):
    """Raised when an operation needs minimum degree >= 2."""


class ZeroEdgeWeight(GraphError):
    """A local operator would have a vanishing off-diagonal entry."""


class BallTooLarge(NBSpectraError):
    pass


class BallTooSmall(NBSpectraError):
    pass


class NonConvergence(NBSpectraError):
    pass


class StructuralViolation(NBSpectraError):
    """A ratio assignment breaks the zero/infinity rules it relies on."""


class MalformedPath(NBSpectraError, ValueError):
    pass


class AnchorZero(NBSpectraError):
    pass


class Divergence(NBSpectraError):
    """A ratio-system iteration failed to converge.

    ``last_good`` carries the last convergent assignment (if any) and
    ``last_shift`` the continuation shift at which it was obtained.
    """

    def __init__(self, message, last_good=None, last_shift=None, iterations=0):
        super().__init__(message)
        self.last_good = last_good
        self.last_shift = last_shift
        self.iterations = iterations


class PoleHit(Divergence):
    pass


class MatchFailure(NBSpectraError):
    pass


class RegionMismatch(NBSpectraError):
    pass
