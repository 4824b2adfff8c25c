"""Exception taxonomy shared across the package.

Exit-code mapping in the CLI: user/input problems (ValidationError and
subclasses, ConfigurationError, ConstraintError, ScopeError) exit 1,
numerical/runtime failures exit 2.
"""


class LsgpError(Exception):
    pass


class ValidationError(LsgpError):
    """Input data violates a documented contract (e.g. response out of range)."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ParseError(ValidationError):
    """Malformed file content; carries the 1-based line number."""


class ConfigurationError(LsgpError):
    """Inconsistent dimensions, empty inputs, or invalid option combinations."""


class ConstraintError(LsgpError):
    """A structural precondition failed (e.g. a subject lacks enough labels)."""


class ScopeError(LsgpError):
    """A per-subject or per-group model cannot resolve the requested unit."""


class SubjectLookupError(LsgpError, KeyError):
    """Strict prediction was requested for a subject unknown to the model."""


class NumericalError(LsgpError):
    """Factorization failure, non-finite objective, or undefined quantity."""
