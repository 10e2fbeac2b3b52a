"""Exception hierarchy shared across the toolkit."""


class SpatecoError(Exception):
    """Base class for all toolkit errors."""


class ParseError(SpatecoError):
    """Malformed input row or file."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ConflictError(SpatecoError):
    """Duplicate key with contradictory values."""


class InsufficientDataError(SpatecoError):
    """Too few observations for the requested computation."""


class DegenerateScaleError(SpatecoError):
    """Zero-variance slice where positive spread is required."""


class UnsupportedSizeError(SpatecoError):
    """Sample size outside the method's supported range."""


class GeometryError(SpatecoError):
    """Invalid or empty region geometry."""


class FormatError(SpatecoError):
    """Structurally invalid weights file."""


class ReferentialError(FormatError):
    """Weights file references an unknown region id."""


class AlignmentError(SpatecoError):
    """Value vector does not line up with the weights' region order."""


class ConvergenceError(SpatecoError):
    """Iterative estimation failed to converge."""

    def __init__(self, message, trace=None):
        self.trace = trace or []
        super().__init__(message)


class RankError(SpatecoError):
    """Singular or collinear predictor set."""


class ParameterError(SpatecoError):
    """Invalid configuration parameter."""
