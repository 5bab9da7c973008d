"""Exception hierarchy shared by all qlump modules."""

from __future__ import annotations


class QlumpError(Exception):
    """Base class for every error raised by qlump."""


class DimensionError(QlumpError, ValueError):
    """Operands live in spaces of different dimension."""


class CapacityError(QlumpError):
    """A backend or reduction cap would be exceeded.

    ``partial_d`` carries the reduced dimension reached so far when the
    error is raised from inside a lumping computation.
    """

    def __init__(self, message: str, partial_d: int | None = None):
        super().__init__(message)
        self.partial_d = partial_d


class DomainError(QlumpError, ValueError):
    """Arguments are outside the mathematical domain of an operation."""


class ParseError(QlumpError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line
        self.message = message


class UnsupportedGateError(ParseError):
    def __init__(self, name: str, line: int):
        super().__init__(line, f"unsupported gate '{name}'")
        self.name = name


class DegenerateOutcomeError(QlumpError):
    """The selected measurement outcome has (numerically) zero probability."""


class ConfigError(QlumpError):
    """Malformed benchmark manifest or command-line configuration."""


class NumericalError(QlumpError):
    """A numerical postcondition failed beyond its tolerance."""


class RunTimeoutError(QlumpError, TimeoutError):
    """A run exceeded its time budget.

    ``partial`` is a dict describing how far the run got.
    """

    def __init__(self, message: str, partial: dict | None = None):
        super().__init__(message)
        self.partial = partial or {}
