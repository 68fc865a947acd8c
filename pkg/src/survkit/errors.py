"""Exception hierarchy.

Input problems (bad files, bad arguments) derive from :class:`InputError`;
the CLI maps them to exit status 2. Everything raised while fitting or
evaluating on otherwise valid input derives from :class:`FitError` and maps
to exit status 1.
"""


class SurvkitError(Exception):
    """Base class for all package errors."""


class InputError(SurvkitError, ValueError):
    """Invalid input data or arguments."""


class SchemaError(InputError):
    """A required column is missing from a CSV header."""

    def __init__(self, column, message=None):
        self.column = column
        super().__init__(message or f"missing required column: {column!r}")


class ParseError(InputError):
    """A cell could not be parsed; ``row`` is the 1-based data row number."""

    def __init__(self, row, column, value):
        self.row = row
        self.column = column
        self.value = value
        super().__init__(f"row {row}: cannot parse {column!r} value {value!r}")


class ValidationError(InputError):
    """Data violates a documented invariant."""


class FitError(SurvkitError, RuntimeError):
    """Model fitting or evaluation failed on valid input."""


class ConvergenceError(FitError):
    """The optimiser diverged."""


class NoComparablePairsError(FitError):
    """No censoring-comparable pair exists."""

    def __init__(self, message="no comparable pairs"):
        super().__init__(message)
