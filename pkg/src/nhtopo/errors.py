"""Exception hierarchy; each category maps to a distinct CLI exit status."""


class NHTopoError(Exception):
    exit_code = 1


class ConfigurationError(NHTopoError, ValueError):
    exit_code = 2


class DimensionError(ConfigurationError):
    """Operation requires a different band count."""


class DomainError(ConfigurationError):
    """Argument outside the mathematical domain of the operation."""


class NumericalError(NHTopoError, ArithmeticError):
    exit_code = 3


class TrackingError(NumericalError):
    """Sheet continuation could not disambiguate a segment, even after refinement."""

    def __init__(self, message, segment=None):
        super().__init__(message)
        self.segment = segment


class SweepError(NumericalError):
    pass


class DegeneracyError(NHTopoError):
    exit_code = 4

    def __init__(self, message, k=None):
        super().__init__(message)
        self.k = k


class GeometryError(NHTopoError):
    exit_code = 5
