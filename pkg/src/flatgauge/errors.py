class FlatgaugeError(Exception):
    exit_code = 2


class ConfigError(FlatgaugeError):
    exit_code = 1


class GeometryError(FlatgaugeError):
    pass


class NumericalError(FlatgaugeError):
    pass


class InsufficientData(NumericalError):
    """Too few sample points in a ball to define a plane fit."""


class StatisticalFailure(NumericalError):
    pass


class DecompositionFailure(NumericalError):
    pass


class VerificationFailure(FlatgaugeError):
    exit_code = 3


class ResourceError(FlatgaugeError):
    pass


class FieldError(FlatgaugeError):
    """A field evaluator produced a negative or non-finite gradient magnitude."""
