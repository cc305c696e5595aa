"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid system parameters or experiment configuration."""


class NumericalError(ArithmeticError):
    """A numerical routine failed (non-convergence, indefinite matrix, ...)."""


class ConvergenceError(NumericalError):
    """A fixed-point iteration did not converge.

    Attributes
    ----------
    residual : float
        Last fixed-point defect.
    trace : tuple of float
        Iterates visited before giving up (may be truncated).
    """

    def __init__(self, message, residual=float("nan"), trace=()):
        super().__init__(message)
        self.residual = residual
        self.trace = tuple(trace)
