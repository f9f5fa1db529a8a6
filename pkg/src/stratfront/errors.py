"""Exception hierarchy shared across the package."""


class StratFrontError(Exception):
    """Base class for package errors."""


class ModelError(StratFrontError):
    """Invalid geometry, well, forcing, or field data."""


class ConfigError(StratFrontError):
    """Malformed or inconsistent experiment configuration (CLI exit 2)."""


class NumericalError(StratFrontError):
    """A solver failed to produce a usable answer (CLI exit 3)."""


class BlowUpError(NumericalError):
    """Field values left the admissible range during time stepping."""


class WindowTooSmallError(NumericalError):
    """The computational window cannot support the requested evaluation."""


class BracketError(NumericalError):
    """A bisection bracket failed to classify."""


class NonConvergenceError(NumericalError):
    """Iteration budget exhausted before reaching the requested tolerance."""
