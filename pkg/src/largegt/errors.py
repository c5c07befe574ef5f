"""Exception hierarchy shared across the package.

Everything raised on bad user input or bad files derives from LargeGTError
so the CLI can map it to exit code 1; programming errors stay ordinary
Python exceptions.
"""


class LargeGTError(Exception):
    """Base class for all validation, format and contract errors."""


class ContractViolation(LargeGTError):
    """An argument or state violates a documented precondition."""


class ValidationError(LargeGTError):
    """Input data is structurally valid but semantically inconsistent."""


class BoundsError(ValidationError):
    """An index or label is outside its valid range."""


class ParseError(ValidationError):
    """A text input could not be parsed."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class FormatError(LargeGTError):
    """A binary file has a bad header, version or truncated payload."""


class StateError(LargeGTError):
    """An operation was invoked before required state was initialized."""
