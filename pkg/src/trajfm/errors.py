"""Exception types shared across the package."""


class TrajfmError(Exception):
    """Base class for all package errors."""


class ConfigurationError(TrajfmError, ValueError):
    """Unsupported parameter (block size, strategy name, ...)."""


class InputFormatError(TrajfmError, ValueError):
    """Malformed trajectory input; carries the offending line number."""

    def __init__(self, message, lineno=None):
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
        self.lineno = lineno


class InvalidQueryError(TrajfmError, ValueError):
    """Query path contains a sentinel or a symbol outside the edge alphabet."""


class IndexFormatError(TrajfmError, ValueError):
    """Index file is truncated, corrupted or of an unknown version."""


class ConsistencyError(TrajfmError, RuntimeError):
    """Internal invariant broken while assembling an index."""
