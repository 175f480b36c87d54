"""Exception types raised across the package."""


class LayeredISPError(Exception):
    """Base class for all package errors."""


class InvalidDimensionError(LayeredISPError, ValueError):
    pass


class OutsideApertureError(LayeredISPError, ValueError):
    pass


class InvalidConfigError(LayeredISPError, ValueError):
    pass


class InvalidOrderError(LayeredISPError, ValueError):
    pass


class InvalidPointError(LayeredISPError, ValueError):
    pass


class InvalidScalingError(LayeredISPError, ValueError):
    pass


class NearSingularError(LayeredISPError, ArithmeticError):
    """The 2x2 retrieval system is too close to singular.

    The offending relative determinant is kept on ``det`` so callers can retry
    with a different reference offset.
    """

    def __init__(self, message, det=0.0):
        super().__init__(message)
        self.det = det


class UndefinedMetricError(LayeredISPError, ZeroDivisionError):
    pass


class SchemaError(LayeredISPError, ValueError):
    """A data file does not match the expected schema.

    ``line`` is the 1-based line number of the offending row, when known.
    """

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
