"""Exception types raised across the package."""


class ContractViolation(ValueError):
    """Inputs break a documented precondition (shape, alphabet, symmetry)."""


class DegenerateLabelsError(ValueError):
    """The least-squares block fit is undefined for the given labels.

    Raised for instance when every rank label is equal, so the slope
    estimate has a zero denominator.
    """


class ConvergenceError(RuntimeError):
    """An iterative numerical routine hit its iteration cap.

    Parameters
    ----------
    message : str
    last_iterate : object, optional
        Whatever the solver held when it gave up.
    """

    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class SupportTooLargeError(ContractViolation):
    """Restricted least squares was asked to fit more coefficients than rows."""


class ConfigError(ValueError):
    """An experiment configuration file is malformed or out of range."""
