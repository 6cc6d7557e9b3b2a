"""Shared exception types."""


class SaddleSimError(Exception):
    """Base class for all library errors."""


class InvalidDimension(SaddleSimError):
    pass


class NotSymmetric(SaddleSimError):
    pass


class NotPSD(SaddleSimError):
    """A matrix that must be positive semidefinite is not (beyond tolerance)."""


class DivergenceDetected(SaddleSimError):
    pass


class UnsupportedNoise(SaddleSimError):
    pass


class InvalidTag(SaddleSimError):
    pass


class GridMismatch(SaddleSimError):
    pass


class StatisticMismatch(SaddleSimError):
    pass


class InvalidInput(SaddleSimError):
    pass


class DivergentRegime(SaddleSimError):
    """A closed-form formula was evaluated outside its convergent regime."""

    def __init__(self, message, coordinate=None):
        super().__init__(message)
        self.coordinate = coordinate


class SgdaBilinearDivergence(DivergentRegime):
    """rho = 0 on a pure bilinear game: the stationary variance does not exist."""


class Degenerate(SaddleSimError):
    def __init__(self, message, coordinate=None):
        super().__init__(message)
        self.coordinate = coordinate


class QuadratureError(SaddleSimError):
    pass


class ConfigError(SaddleSimError):
    def __init__(self, field, message=None):
        super().__init__(message or f"invalid or missing config field: {field}")
        self.field = field
