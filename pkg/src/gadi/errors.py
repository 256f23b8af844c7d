"""Exception hierarchy shared by all solvers."""


class GadiError(Exception):
    """Base class for every error raised by this package."""


class DimensionMismatch(GadiError, ValueError):
    pass


class SingularShift(GadiError, ArithmeticError):
    """The shifted matrix ``M + alpha*I`` is numerically singular."""


class SingularOperator(GadiError, ArithmeticError):
    pass


class NoConvergence(GadiError, ArithmeticError):
    pass


class DenseThresholdExceeded(GadiError, ValueError):
    pass


class WidthCapExceeded(GadiError, MemoryError):
    """Uncompressed low-rank factors would exceed the configured memory cap."""


class NotStabilizing(GadiError, ValueError):
    """The initial feedback does not make ``B K0^T - A`` positive-real."""


class MaxIterations(GadiError, ArithmeticError):
    pass


class MaxOuterIterations(MaxIterations):
    """Kleinman-Newton ran out of outer steps; the partial result is attached."""

    def __init__(self, message, solution=None):
        super().__init__(message)
        self.solution = solution


class ZeroFeedback(GadiError, ArithmeticError):
    pass


class UnknownFamily(GadiError, ValueError):
    pass
