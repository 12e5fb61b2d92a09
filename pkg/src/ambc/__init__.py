"""Ambient FSK backscatter over LTE CRS: link simulation and cepstral device separation."""

from .config import KeyPair, SystemConfig
from .errors import (
    AmbcError,
    ConfigError,
    OutOfRegimeError,
    SingularImpedanceError,
    SingularInputError,
    TraceParseError,
)

__all__ = [
    "AmbcError",
    "ConfigError",
    "KeyPair",
    "OutOfRegimeError",
    "SingularImpedanceError",
    "SingularInputError",
    "SystemConfig",
    "TraceParseError",
]
__version__ = "0.1.0"
