"""Exception hierarchy shared across the package."""


class GuesslabError(Exception):
    """Base class for all errors raised by this package."""


class FuncSyntaxError(GuesslabError):
    """Malformed index-function expression. Carries the offending position."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class FuncEvalError(GuesslabError):
    """Evaluation failure, typically overflow past the unsigned 64-bit range."""


class HorizonError(GuesslabError):
    """Mismatched or insufficient horizons between finite-window objects."""


class ConstructionError(GuesslabError):
    """Tree construction ran out of admissible levels below the cap.

    ``demand`` describes the unmet requirement.
    """

    def __init__(self, message: str, demand: dict | None = None):
        super().__init__(message)
        self.demand = demand or {}


class FipError(GuesslabError):
    """A finite-intersection-property requirement failed.

    ``subfamily`` names the generators whose intersection is empty.
    """

    def __init__(self, message: str, subfamily: tuple = ()):
        super().__init__(message)
        self.subfamily = tuple(subfamily)


class DiagonalError(GuesslabError):
    """Diagonalization could not proceed (counting hypothesis or exhaustion)."""

    def __init__(self, message: str, level: int | None = None):
        super().__init__(message)
        self.level = level


class CodecError(GuesslabError):
    """Pair codec cannot encode or decode the requested value."""


class PartitionError(GuesslabError):
    """Piece list is not a partition of the window."""
