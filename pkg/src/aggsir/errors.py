"""Exception hierarchy. Everything derives from ``AggsirError``."""

from __future__ import annotations


class AggsirError(Exception):
    pass


class InvalidBounds(AggsirError, ValueError):
    pass


class TooFewCells(AggsirError, ValueError):
    pass


class NonFiniteSample(AggsirError, ValueError):
    pass


class DimensionMismatch(AggsirError, ValueError):
    pass


class SizeMismatch(AggsirError, ValueError):
    pass


class ShapeMismatch(AggsirError, ValueError):
    pass


class UnknownCompartment(AggsirError, KeyError):
    pass


class ArityMismatch(AggsirError, ValueError):
    pass


class NegativeRate(AggsirError, ValueError):
    pass


class NonSmoothReaction(AggsirError, ValueError):
    pass


class NonPositiveAlpha(AggsirError, ValueError):
    pass


class NonPositiveGamma(AggsirError, ValueError):
    pass


class SupportExceedsDomain(AggsirError, ValueError):
    pass


class OffsetNotTabulated(AggsirError, ValueError):
    pass


class CFLViolation(AggsirError, RuntimeError):
    pass


class NonFiniteState(AggsirError, RuntimeError):
    """Raised when a step produces NaN or inf. ``state`` holds the offending state."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class SolverAbort(AggsirError, RuntimeError):
    """A run stopped early; carries the partial summary and last good state."""

    def __init__(self, message, summary=None, state=None):
        super().__init__(message)
        self.summary = summary
        self.state = state


class ConfigParseError(AggsirError, ValueError):
    def __init__(self, message, line=None):
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)
        self.line = line


class ConfigValidationError(AggsirError, ValueError):
    def __init__(self, field, message, line=None):
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"{field}: {message}{where}")
        self.field = field
        self.line = line
