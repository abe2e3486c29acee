"""Exception hierarchy shared by the pipeline stages."""


class StnSyncError(Exception):
    """Base class for every error raised by this package."""


class DataError(StnSyncError):
    """Input data is malformed or violates an invariant."""


class FormatError(DataError):
    """Dataset header is missing or cannot be parsed."""


class IntegrityError(DataError):
    """Dataset contents disagree with their header."""


class ValidationError(DataError):
    """A value (e.g. a non-finite sample) is not acceptable."""


class ShapeError(DataError, ValueError):
    """Array shapes or lengths are incompatible."""


class BoundaryError(DataError):
    """An epoch window falls outside the signal."""


class DegenerateError(DataError):
    """A computation is undefined for the given input."""


class LabelError(DataError):
    """Class labels are missing, unknown or insufficient."""


class ConfigError(StnSyncError, ValueError):
    """A configuration parameter is out of range."""


class ConvergenceError(StnSyncError):
    """An iterative solver hit its iteration cap.

    The final optimality residual is kept in ``residual``.
    """

    def __init__(self, message, residual=float("nan")):
        super().__init__(message)
        self.residual = residual
