"""Exception types shared across the package."""


class MmreconError(Exception):
    """Base class for all package errors."""


class InvalidInputError(MmreconError, ValueError):
    """Input data violates a contract (non-finite entries, wrong kind)."""


class DimensionError(MmreconError, ValueError):
    """Grid shapes are incompatible or below the supported minimum."""


class InvalidSpecError(MmreconError, ValueError):
    """A mask specification is internally inconsistent."""


class InvalidParameterError(MmreconError, ValueError):
    """A scalar parameter is outside its valid range."""


class FormatError(MmreconError, ValueError):
    """A grid file is malformed; the message names the byte offset."""


class NumericalError(MmreconError, RuntimeError):
    """An iterative routine failed to converge within its cap."""
