"""Exception types raised across the toolkit."""


class BGTError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(BGTError, ValueError):
    """Malformed input (dataset record, model spec, behavior)."""


class DegenerateGame(ValidationError):
    """All payoffs equal, so the game cannot be standardized."""


class BadPermutation(ValidationError):
    pass


class EmptyObservation(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class ShapeMismatch(ValidationError):
    pass


class BadConstants(ValidationError):
    pass


class ZeroCoefficients(ValidationError):
    """A learned linear potential with both coefficients equal to zero."""


class EmptySplit(ValidationError):
    pass


class EmptyInput(ValidationError):
    pass


class NotScalarRoot(BGTError):
    pass


class NumericalError(BGTError, ArithmeticError):
    """Base for numerical failures (CLI exit code 2)."""


class NonFiniteLoss(NumericalError):
    pass
