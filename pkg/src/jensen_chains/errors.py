"""Exception and warning types shared across the package."""


class JensenError(Exception):
    """Base class for all package errors."""


class DomainError(JensenError, ValueError):
    """A point lies outside the domain of a convex function."""


class LengthMismatch(JensenError, ValueError):
    """Paired vectors do not have the same length."""


class ZeroDenominator(JensenError, ZeroDivisionError):
    """A ratio p_i/q_i was requested with q_i = 0."""


class ShapeMismatch(JensenError, ValueError):
    """A supplied q vector does not fit the current chain length.

    ``step`` is the 1-based step at which the mismatch was detected.
    """

    def __init__(self, message, step=None, expected=None, got=None):
        super().__init__(message)
        self.step = step
        self.expected = expected
        self.got = got


class InvariantViolation(JensenError):
    """A structural property of a chain failed to hold."""


class ConfigError(JensenError, ValueError):
    """Invalid configuration or empty input."""


class StallWarning(UserWarning):
    """A lower chain hit m_k = 0 and stopped making progress."""
