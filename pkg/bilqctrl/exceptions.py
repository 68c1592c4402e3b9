"""
Error Hierarchy
---------------
Every failure the library reports on purpose derives from BilqctrlError.
"""
from typing import Optional


class BilqctrlError(Exception):
    """Root of all bilqctrl errors."""


class ValidationError(BilqctrlError, ValueError):
    """A precondition or invariant was violated.

    The message names the violated invariant and, where one applies,
    the tolerance it was checked against.
    """


class SystemFileError(ValidationError):
    """A system or control file could not be parsed."""

    def __init__(self, message: str, path: Optional[str] = None,
                 line: Optional[int] = None, column: Optional[int] = None):
        self.path = path
        self.line = line
        self.column = column
        location = ""
        if path is not None:
            location = f"{path}"
            if line is not None:
                location += f":{line}"
                if column is not None:
                    location += f":{column}"
            location += ": "
        super().__init__(f"{location}{message}")


class OutOfScopeError(ValidationError):
    """The request lies outside what the library supports (e.g. L^p with p < 1)."""
