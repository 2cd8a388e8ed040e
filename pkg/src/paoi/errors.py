"""Exception hierarchy shared by all modules.

The CLI maps these onto process exit codes, so the split matters:
validation problems (bad parameters, unstable systems, malformed
configs) are distinct from capability limits (model shapes the
analysis does not cover) and from numerical failures.
"""


class PaoiError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(PaoiError, ValueError):
    """Invalid input: parameter out of domain or malformed config."""


class ParameterError(ValidationError):
    """A distribution or system parameter violates its domain."""


class StabilityError(ValidationError):
    """An infinite-buffer analysis was asked for an unstable system."""


class UnsupportedModelError(PaoiError):
    """The requested computation is outside what the analysis covers."""


class NumericalError(PaoiError, ArithmeticError):
    """A solve or evaluation failed to reach the required accuracy."""


class DivergenceError(NumericalError):
    """A quantity diverges for the given input (for example p -> 1)."""


class InternalConsistencyError(NumericalError):
    """An internal identity that must hold analytically was violated."""
