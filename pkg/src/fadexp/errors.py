"""Exception hierarchy shared by all modules."""


class FadexpError(Exception):
    """Base class for library errors."""


class DomainError(FadexpError, ValueError):
    """Argument outside the documented domain of an operation."""


class OverflowSignal(FadexpError, OverflowError):
    """Result would overflow double precision."""


class ConvergenceError(FadexpError, ArithmeticError):
    """An iterative scheme failed to reach its tolerance.

    Attributes
    ----------
    partial : float or None
        Best estimate available when the iteration stopped.
    est_error : float or None
        Error estimate attached to ``partial``.
    """

    def __init__(self, message, partial=None, est_error=None):
        super().__init__(message)
        self.partial = partial
        self.est_error = est_error


class UnsupportedError(FadexpError, ValueError):
    """Operation not defined for this combination of inputs."""
