"""Exception hierarchy shared by every module of the package."""


class ForecastError(Exception):
    """Base class for all package errors."""


class SeriesTooShort(ForecastError, ValueError):
    pass


class DegenerateRange(ForecastError, ValueError):
    """Raised when normalization statistics have max == min."""


class LagTooLarge(ForecastError, ValueError):
    pass


class SingularRegression(ForecastError, ArithmeticError):
    pass


class DimensionMismatch(ForecastError, ValueError):
    pass


class CholeskyFailure(ForecastError, ArithmeticError):
    pass


class OutOfBounds(ForecastError, ValueError):
    pass


class NonFiniteLoss(ForecastError, ArithmeticError):
    """Training or a forward pass produced NaN/inf."""


class HistoryTooShort(ForecastError, ValueError):
    pass


class PipelineFailed(ForecastError, RuntimeError):
    pass


class LengthMismatch(ForecastError, ValueError):
    pass


class EmptyInput(ForecastError, ValueError):
    pass


class UnknownReference(ForecastError, KeyError):
    pass


class DomainError(ForecastError, ValueError):
    pass


class InsufficientData(ForecastError, ValueError):
    pass


class ParseError(ForecastError, ValueError):
    def __init__(self, message, row=None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class GapError(ForecastError, ValueError):
    pass


class NonMonotoneError(ForecastError, ValueError):
    pass
