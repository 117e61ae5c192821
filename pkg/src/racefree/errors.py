"""Exception hierarchy shared by every module."""

from __future__ import annotations


class RaceFreeError(Exception):
    """Base class for all errors raised by the package."""


class LocatedError(RaceFreeError):
    """An error that points at a line/column in some source text."""

    def __init__(self, message: str, line: int = 0, col: int = 0, source: str | None = None):
        self.message = message
        self.line = line
        self.col = col
        self.source = source
        where = f"{source}:" if source else ""
        super().__init__(f"{where}{line}:{col}: {message}")


class ProtocolSyntaxError(LocatedError):
    pass


class ProtocolError(RaceFreeError):
    """A structurally invalid protocol (bad guard reference, conflicting capacities...)."""


class ProgramSyntaxError(LocatedError):
    pass


class ProgramError(LocatedError):
    """A program that parses but falls outside the supported fragment."""


class BindingError(RaceFreeError):
    pass


class OrderError(RaceFreeError):
    pass


class TransformError(RaceFreeError):
    pass


class BoundExceeded(RaceFreeError):
    pass


class TraceSyntaxError(LocatedError):
    pass
