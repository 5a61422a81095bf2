"""Exception types shared across the package."""


class ForageError(Exception):
    """Base class for all package-specific errors."""


class ParseError(ForageError, ValueError):
    """A source record could not be decoded."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(ForageError, ValueError):
    """Data violates a structural invariant (duplicate ids, bad labels, ...)."""


class ConfigurationError(ForageError, ValueError):
    """A model, lexicon, or embedding setup is unusable as configured."""


class PoolExhaustedError(ForageError, RuntimeError):
    """A query policy was asked to select from an empty unlabeled pool."""


class ProtocolError(ForageError, RuntimeError):
    """An interaction event is invalid in the current session state."""


class NotApplicableError(ForageError, RuntimeError):
    """A metric was requested for a session it is not defined on."""


class DegenerateEmbeddingWarning(UserWarning):
    """A text-model query fell back to the prior due to a zero embedding."""
