"""Exception types raised across the package."""


class AmbcError(Exception):
    """Base class for package errors."""


class ConfigError(AmbcError, ValueError):
    """Inconsistent or out-of-range configuration."""


class SingularImpedanceError(AmbcError, ZeroDivisionError):
    """Raised when Z_x + conj(Z_a) vanishes."""


class SingularInputError(AmbcError, ValueError):
    """Raised when a logarithm is requested of a zero-valued channel sample."""


class OutOfRegimeError(AmbcError, ValueError):
    """Raised when an asymptotic series is evaluated outside its validity range."""


class TraceParseError(AmbcError, ValueError):
    """Malformed trace file. ``lineno`` is 1-based."""

    def __init__(self, path, lineno, message):
        self.path = str(path)
        self.lineno = lineno
        super().__init__(f"{path}:{lineno}: {message}")
