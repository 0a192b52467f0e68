"""Multi-modal compressed-sensing MRI reconstruction with joint spatial alignment."""

from .errors import (
    DimensionError,
    FormatError,
    InvalidInputError,
    InvalidParameterError,
    InvalidSpecError,
    MmreconError,
    NumericalError,
)
from .grids import ComplexImage, DisplacementField, KSpace, SamplingMask

__all__ = [
    "ComplexImage",
    "DisplacementField",
    "KSpace",
    "SamplingMask",
    "MmreconError",
    "InvalidInputError",
    "DimensionError",
    "InvalidSpecError",
    "InvalidParameterError",
    "FormatError",
    "NumericalError",
]

__version__ = "0.1.0"
