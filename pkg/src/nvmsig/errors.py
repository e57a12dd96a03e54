"""Exception types shared across the toolkit.

The CLI maps these onto stable exit codes (validation -> 1, I/O -> 2,
numeric -> 3); library callers can catch them individually.
"""


class NvmsigError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(NvmsigError):
    """Inputs violate a documented precondition or invariant."""


class ParseError(ValidationError):
    """A structured text file does not match its schema.

    `line` is 1-based when the offending line is known.
    """

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class NumericError(NvmsigError):
    """An internal numeric computation produced non-finite values."""
