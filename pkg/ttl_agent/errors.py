"""
Exception hierarchy for the ttl_agent package.

Every error derives from ValueError so code that already guards calls with
``except ValueError`` keeps working, while the CLI can still tell format
errors (exit code 2) from infeasible generation requests (exit code 3).
"""


class TtlError(ValueError):
    """Base class for every error raised by ttl_agent."""


class TtlSyntaxError(TtlError):
    """Raised by the TTL parser. `position` is a 0-based character offset."""

    def __init__(self, message, text="", position=None):
        self.text = text
        self.position = position
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)


class TraceFormatError(TtlError):
    """Raised when a trace file cannot be parsed. `line` is 1-based."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class MapFormatError(TtlError):
    """Raised when a map file cannot be parsed. `line` and `column` are 1-based."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = []
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column}")
        if where:
            message = f"{', '.join(where)}: {message}"
        super().__init__(message)


class PreconditionError(TtlError):
    """Raised when an operation is called outside its documented precondition."""


class InfeasibleGenerationError(TtlError):
    """Raised when a map generator cannot honour the requested constraints."""


class NumericalInstabilityError(TtlError):
    """Raised when an A2C update produces non-finite weights."""


class CheckpointFormatError(TtlError):
    """Raised when an A2C checkpoint file cannot be parsed. `line` is 1-based."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
