"""Exception types shared across the package."""


class MfaTopoError(Exception):
    """Base class for all package-specific errors."""


class DomainError(MfaTopoError):
    """A query point lies outside the model domain (or parameter square)."""


class OrderError(MfaTopoError):
    """A derivative of unsupported order was requested."""


class FitError(MfaTopoError):
    """Least-squares fitting failed (singular or underdetermined system)."""


class ParseError(MfaTopoError):
    """A model/grid/graph file is malformed.

    ``context`` carries the offending field or line for error messages.
    """

    def __init__(self, message: str, context: str | None = None):
        self.context = context
        if context:
            message = f"{message} ({context})"
        super().__init__(message)


class DegeneracyError(MfaTopoError):
    """A derived field is identically zero (or otherwise degenerate)."""
