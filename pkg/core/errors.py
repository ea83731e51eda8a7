# core/errors.py - exception hierarchy shared by the library and the CLI


class MixboundError(Exception):
    """Base class for every error raised by mixbound."""


class DomainError(MixboundError, ValueError):
    """A point or parameter lies outside the support / natural domain."""


class ArgumentError(MixboundError, ValueError):
    """Malformed arguments: empty lists, reversed intervals, family mismatch."""


class QuadratureError(MixboundError):
    """Adaptive quadrature hit its subdivision cap before meeting the tolerance."""

    def __init__(self, message, estimate):
        super().__init__(message)
        self.estimate = estimate


class ConfigError(MixboundError):
    """Invalid experiment configuration; ``field`` names the offending entry."""

    def __init__(self, message, field=None):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field


class InvariantViolation(MixboundError):
    """A certified bound failed one of its own consistency checks."""
