"""Exception hierarchy. The CLI maps each family onto an exit code."""


class GLRLError(Exception):
    pass


class ConfigError(GLRLError, ValueError):
    """Invalid or incompatible solver / experiment configuration."""


class DataError(GLRLError, ValueError):
    """Malformed input data, shape mismatch, or bad file contents."""


class ColdStartError(DataError):
    """A row or column id was never seen at training time."""


class NumericalError(GLRLError, ArithmeticError):
    """Non-finite objective or similar unrecoverable numerical failure."""

    def __init__(self, message, iteration=None):
        if iteration is not None:
            message = f"{message} (iteration {iteration})"
        super().__init__(message)
        self.iteration = iteration


class ZeroOperator(GLRLError):
    """Raised by the power method when the operator is numerically zero.

    Callers treat this as convergence rather than failure.
    """
