class MidasError(Exception):
    """Base class for all errors raised by this package."""


class InvalidVoteError(MidasError, ValueError):
    pass


class ShapeError(MidasError, ValueError):
    pass


class NumericError(MidasError, ArithmeticError):
    pass


class ParameterError(MidasError, ValueError):
    pass


class InsufficientDataError(MidasError, ValueError):
    pass


class EmptyEvaluationError(MidasError, ValueError):
    pass


class InfeasibleError(MidasError, ValueError):
    pass


class ConfigError(MidasError, ValueError):
    pass


class FormatError(MidasError):
    """A dataset or model file failed validation; ``path`` names the offender."""

    def __init__(self, path, message):
        self.path = str(path)
        super().__init__(f"{self.path}: {message}")
