"""Exception hierarchy.

The CLI maps each family to an exit code: configuration problems exit 1,
data problems exit 2 and numeric/training failures exit 3.
"""


class MifusionError(Exception):
    """Base class for all package errors."""


class ConfigError(MifusionError, ValueError):
    """Invalid or incomplete run configuration."""


class DataError(MifusionError, ValueError):
    """Input data violates a documented format or invariant."""


class FormatError(DataError):
    """Malformed file header or structure."""


class RowError(DataError):
    """A single data row could not be parsed.

    Attributes
    ----------
    line : int
        1-based line number in the source text (the header is line 1).
    """

    def __init__(self, line, message):
        self.line = line
        super().__init__(f"line {line}: {message}")


class NumericError(MifusionError, ArithmeticError):
    """A numerical procedure could not produce a valid result."""


class TrainingStalledError(NumericError):
    """Levenberg-Marquardt could not make progress.

    The best model found before stalling is kept on ``best_model`` so callers
    can still use it.
    """

    def __init__(self, message, best_model=None, history=None):
        super().__init__(message)
        self.best_model = best_model
        self.history = history


class StageError(MifusionError):
    """Wraps an error raised inside one pipeline stage."""

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage '{stage}' failed: {cause}")
