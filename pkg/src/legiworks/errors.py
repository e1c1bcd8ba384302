"""Exception types raised by the engine."""


class EngineError(Exception):
    """Base class for all engine-specific errors."""


class DegenerateInput(EngineError):
    """Geometric input too degenerate to operate on (e.g. collinear hull points)."""


class EmptyWorkspace(EngineError):
    """Workspace bounds enclose zero area."""


class OutOfBounds(EngineError):
    """A queried point lies outside the grid."""


class BlockedEndpoint(EngineError):
    """A path endpoint maps to a blocked cell."""


class Unreachable(EngineError):
    """No collision-free path exists between the endpoints."""


class UnreachableGoal(EngineError):
    """A goal has no path from the start or the query point."""


class EmptyGoalSet(EngineError):
    """An inference was requested over zero goals."""


class CyclicPrecedence(EngineError):
    """The precedence relation of a task contains a cycle."""

    def __init__(self, cycle):
        self.cycle = list(cycle)
        super().__init__("cycle " + "->".join(self.cycle))


class TooFewItems(EngineError):
    """A measure needs more items than the workspace provides."""


class PlacementFailure(EngineError):
    """Rejection sampling exhausted its retry budget."""


class InvalidResult(EngineError):
    """A perturbed workspace violates the workspace invariants."""


class EmptyArchive(EngineError):
    """No valid workspace was ever inserted into the archive."""


class ParseError(EngineError):
    """Input bytes are not a well-formed document."""


class VersionError(EngineError):
    """Document format version is unsupported."""


class ValidationError(EngineError):
    """A document field violates the schema; carries the field path."""

    def __init__(self, path: str, reason: str):
        self.path = path
        self.reason = reason
        super().__init__(f"{path}: {reason}")
