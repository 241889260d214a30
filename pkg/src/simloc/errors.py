"""Exception hierarchy shared by all simloc modules."""


class SimlocError(Exception):
    """Base class for every error raised by simloc."""


class InvalidDimensionError(SimlocError, ValueError):
    pass


class InvalidInputError(SimlocError, ValueError):
    pass


class DomainError(SimlocError, ValueError):
    pass


class ConvergenceError(SimlocError, RuntimeError):
    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class EmptyWindowError(SimlocError, ValueError):
    pass


class IntegrandError(SimlocError, ArithmeticError):
    def __init__(self, message, abscissa=None):
        super().__init__(message)
        self.abscissa = abscissa


class UnsupportedDimensionError(SimlocError, ValueError):
    pass


class ConfigError(SimlocError, ValueError):
    pass


class QuadratureError(SimlocError, RuntimeError):
    """An analytic evaluation whose quadrature did not reach its tolerance."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result
