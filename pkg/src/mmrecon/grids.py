"""Core grid types: complex images, k-space grids, sampling masks, displacement fields.

All types wrap read-only numpy arrays so instances can be shared freely
between threads and across service requests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, InvalidInputError

MIN_SIZE = 8


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, copy=True)
    out.flags.writeable = False
    return out


def _check_2d_finite(data: np.ndarray, what: str) -> None:
    if data.ndim != 2:
        raise DimensionError(f"{what} must be 2-D, got shape {data.shape}")
    if data.shape[0] < MIN_SIZE or data.shape[1] < MIN_SIZE:
        raise DimensionError(
            f"{what} must be at least {MIN_SIZE}x{MIN_SIZE}, got {data.shape[0]}x{data.shape[1]}"
        )
    if not np.all(np.isfinite(data)):
        raise InvalidInputError(f"{what} contains non-finite entries")


@dataclass(frozen=True)
class ComplexImage:
    """H x W complex-valued image grid (row-major)."""

    data: np.ndarray

    def __post_init__(self) -> None:
        data = _freeze(np.asarray(self.data, dtype=np.complex128))
        _check_2d_finite(data, "image")
        object.__setattr__(self, "data", data)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def magnitude(self) -> np.ndarray:
        return np.abs(self.data)

    @classmethod
    def from_real(cls, arr: np.ndarray) -> "ComplexImage":
        return cls(np.asarray(arr, dtype=np.float64).astype(np.complex128))


@dataclass(frozen=True)
class KSpace:
    """H x W complex frequency-domain grid with the DC coefficient at the center bin."""

    data: np.ndarray

    def __post_init__(self) -> None:
        data = _freeze(np.asarray(self.data, dtype=np.complex128))
        _check_2d_finite(data, "k-space")
        object.__setattr__(self, "data", data)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape


@dataclass(frozen=True)
class SamplingMask:
    """Cartesian 1-D sampling pattern: a boolean flag per k-space column.

    mask(r, c) = columns[c] for every row r.
    """

    height: int
    columns: np.ndarray

    def __post_init__(self) -> None:
        cols = _freeze(np.asarray(self.columns, dtype=bool))
        if cols.ndim != 1:
            raise DimensionError(f"mask columns must be 1-D, got shape {cols.shape}")
        if self.height < MIN_SIZE or cols.shape[0] < MIN_SIZE:
            raise DimensionError(
                f"mask must be at least {MIN_SIZE}x{MIN_SIZE}, got {self.height}x{cols.shape[0]}"
            )
        if not cols.any():
            raise InvalidInputError("mask must sample at least one column")
        object.__setattr__(self, "columns", cols)

    @property
    def width(self) -> int:
        return self.columns.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    def as_array(self) -> np.ndarray:
        """Expand to the full H x W boolean grid."""
        return np.broadcast_to(self.columns, (self.height, self.width))

    @property
    def num_sampled(self) -> int:
        return int(self.columns.sum())


@dataclass(frozen=True)
class DisplacementField:
    """Per-pixel displacement in pixels; dx moves along columns, dy along rows.

    The field stores the sampling offset: warping with it reads
    input(r + dy(r, c), c + dx(r, c)).
    """

    dx: np.ndarray
    dy: np.ndarray

    def __post_init__(self) -> None:
        dx = _freeze(np.asarray(self.dx, dtype=np.float64))
        dy = _freeze(np.asarray(self.dy, dtype=np.float64))
        _check_2d_finite(dx, "displacement dx")
        _check_2d_finite(dy, "displacement dy")
        if dx.shape != dy.shape:
            raise DimensionError(f"dx shape {dx.shape} != dy shape {dy.shape}")
        object.__setattr__(self, "dx", dx)
        object.__setattr__(self, "dy", dy)

    @property
    def height(self) -> int:
        return self.dx.shape[0]

    @property
    def width(self) -> int:
        return self.dx.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.dx.shape

    @classmethod
    def zeros(cls, shape: tuple[int, int]) -> "DisplacementField":
        return cls(np.zeros(shape), np.zeros(shape))

    def magnitude(self) -> np.ndarray:
        """Per-pixel Euclidean displacement length."""
        return np.hypot(self.dx, self.dy)


def check_same_shape(a, b, what: str = "operands") -> None:
    if a.shape != b.shape:
        raise DimensionError(f"{what} have mismatched shapes {a.shape} vs {b.shape}")
