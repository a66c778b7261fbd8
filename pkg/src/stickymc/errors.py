"""Exception hierarchy shared by every stickymc module."""


class StickyError(Exception):
    """Base class for all package errors."""


class DuplicatePoint(StickyError):
    """A support point lies within the minimum separation of an existing one."""


class NonFiniteValue(StickyError):
    """The log-target is not finite at a requested support point."""


class TooFewPoints(StickyError):
    """Not enough support points to build the requested construction."""


class InvalidTailSlope(StickyError):
    """A secant tail would not decay, so the proposal cannot be normalized."""


class NonIntegrable(StickyError):
    """A piece with an infinite bound has a non-decaying density."""


class OutOfSupport(StickyError):
    """Evaluation point outside a bounded proposal support."""


class DomainError(StickyError):
    """Argument outside the mathematical domain of a function."""


class UndefinedRatio(StickyError, RuntimeWarning):
    """Ratio distance requested where both densities vanish; issued as a warning."""


class RsLoopStall(StickyError):
    """The ARMS rejection loop exceeded its redraw cap."""


class InvalidShape(StickyError):
    """An inverse-gamma shape parameter is not positive."""


class DegenerateTrace(StickyError):
    """A trace has zero variance, so autocorrelations are undefined."""


class PreconditionError(StickyError):
    """A Gibbs reset set contains the current coordinate value."""


class EmptyAxis(StickyError):
    """A grid axis has fewer than two points."""


class ParseError(StickyError):
    """A configuration file could not be parsed."""


class ValidationError(StickyError):
    """A configuration field holds an invalid value."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
