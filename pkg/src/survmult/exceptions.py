"""Exception types raised across the package."""


class SurvmultError(Exception):
    """Base class for all package errors."""


class DomainError(SurvmultError, ValueError):
    """An argument lies outside the domain an operation is defined on."""


class ParseError(SurvmultError, ValueError):
    """A data file contains a row that cannot be read."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class FormatError(SurvmultError, ValueError):
    """A data file is structurally wrong (empty, wrong column count, ...)."""


class ScoringError(SurvmultError, ArithmeticError):
    """A performance score cannot be computed, e.g. a zero censoring weight."""

    def __init__(self, message, time=None):
        self.time = time
        super().__init__(message)


class UndefinedResultError(SurvmultError, ArithmeticError):
    """The requested statistic is undefined for the given data."""
