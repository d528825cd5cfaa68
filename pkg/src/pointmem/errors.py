"""Exception hierarchy shared across the package."""


class PointmemError(Exception):
    """Base class for all package errors."""


class DimensionError(PointmemError, ValueError):
    pass


class ContractError(PointmemError, ValueError):
    """A documented precondition of an operation was violated."""


class EmptyMemoryError(PointmemError, RuntimeError):
    """Attention was asked to run against an empty context."""


class DegenerateInputError(PointmemError, ValueError):
    """Input geometry is insufficient or degenerate for the requested estimate."""


class AssociationError(PointmemError, ValueError):
    pass


class ParseError(PointmemError, ValueError):
    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"{line}: " if path is not None else f"line {line}: "
        elif where:
            where += " "
        super().__init__(where + message)


class NonFiniteLossError(PointmemError, FloatingPointError):
    pass
