"""Exception hierarchy shared across the package.

``UecError`` marks data/math problems (CLI exit code 2); ``UsageError``
marks bad invocations (CLI exit code 1).
"""


class UecError(Exception):
    """Base class for all data and numerical errors."""


class UsageError(UecError):
    """Invalid invocation: bad flags, missing arguments."""


class DimensionMismatchError(UecError):
    """Vector or store dimensions do not line up."""


class DegenerateEmbeddingError(UecError):
    """Zero-norm mean cannot be normalized."""


class DegenerateUncertaintyError(UecError):
    """Nonpositive trace or cost where a positive value is required."""


class FitConvergenceError(UecError):
    """Newton iteration exhausted its budget before the gradient tolerance."""

    def __init__(self, iterations: int, grad_norm: float):
        self.iterations = iterations
        self.grad_norm = grad_norm
        super().__init__(
            f"MAP fit did not converge in {iterations} iterations "
            f"(final gradient inf-norm {grad_norm:.3e})"
        )


class UndefinedCorrelationError(UecError):
    """Rank correlation is undefined (zero rank variance)."""


class StoreFormatError(UecError):
    """Malformed or corrupted persisted data."""
