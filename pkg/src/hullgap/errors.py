class HullgapError(Exception):
    """Base class for all errors raised by hullgap."""


class InputError(HullgapError, ValueError):
    """Arguments violate an operation's preconditions."""


class ParseError(HullgapError, ValueError):
    """A file or byte stream does not match its declared format.

    ``offset`` is the byte offset (or 1-based line number for text formats)
    where the problem was detected, when known.
    """

    def __init__(self, message, offset=None):
        super().__init__(message)
        self.offset = offset


class TrainingError(HullgapError, RuntimeError):
    """Model training diverged."""

    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch


class FitError(HullgapError, ValueError):
    """A constrained fit could not be solved (rank-deficient system)."""


class GenerationError(HullgapError, RuntimeError):
    """A random generator could not satisfy its constraints."""
