"""Exception and warning hierarchy for contagion-map pipelines."""

from typing import Optional


class ContagionMapError(Exception):
    """Base class for all library errors."""
    pass


class DataError(ContagionMapError):
    """Input data violates a precondition (CLI exit code 2)."""
    pass


class InvalidInput(DataError, ValueError):
    """A type constructor rejected its arguments."""
    pass


class IndexOutOfRange(DataError, IndexError):
    """A node index lies outside ``[0, N)``."""
    pass


class SelfLoop(DataError):
    """An edge joins a node to itself."""
    pass


class GraphDisconnected(DataError):
    """Shortest paths are undefined between some node pairs."""
    pass


class ConstantInput(DataError):
    """A correlation was requested on a constant vector."""
    pass


class CapacityExceeded(DataError):
    """A Vietoris-Rips complex outgrew the configured simplex budget."""
    pass


class MatchingFailure(DataError):
    """Stub matching could not produce a simple graph."""
    pass


class MalformedInput(DataError):
    """A file could not be parsed.

    Attributes:
        line: 1-based line number of the offending record
        column: 1-based column number, if known
    """

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f" (line {line}"
            where += f", column {column})" if column is not None else ")"
        super().__init__(f"{message}{where}")


class EigenFailure(ContagionMapError):
    """The symmetric eigensolver did not converge."""
    pass


class ZeroDegreeNodeWarning(UserWarning):
    """Isolated nodes can only be active when seeded."""
    pass


class DegenerateInputWarning(UserWarning):
    """Coincident points make neighbour selection depend on tie-breaking."""
    pass
