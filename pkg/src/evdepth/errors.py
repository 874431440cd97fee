"""Exception hierarchy shared across the package.

The CLI maps these to exit codes: ConfigurationError -> 1, DataError -> 2,
NumericalError -> 3. Everything else is a bug and propagates.
"""


class EvdepthError(Exception):
    """Base class for all package errors."""


class ConfigurationError(EvdepthError):
    """Invalid or inconsistent configuration (bad keys, bad ranges, bad schema)."""


class DataError(EvdepthError):
    """Malformed or inconsistent input data."""


class ParseError(DataError):
    """A line or record could not be parsed; carries file context when known."""

    def __init__(self, message: str, line_number: int | None = None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class OrderingError(DataError):
    """Timestamps regress beyond the declared tolerance."""


class AlignmentError(DataError):
    """Grids or maps that must share geometry do not."""


class NumericalError(EvdepthError):
    """Degenerate numerical situation (non-convergence, singular geometry)."""


class DistortionError(NumericalError):
    """Iterative undistortion failed to converge."""


class DegenerateGeometryError(NumericalError):
    """Singular homography or warp to a point at infinity."""


class RangeError(EvdepthError):
    """Query outside the supported domain (e.g. pose time outside trajectory)."""
