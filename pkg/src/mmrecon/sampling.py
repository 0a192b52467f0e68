"""Cartesian undersampling mask generators.

A mask samples whole k-space columns. Out of round(width / acceleration)
sampled columns, a fraction ``center_alloc`` (default 32%) forms a
contiguous low-frequency block around the DC column; the remainder is
placed either equispaced or uniformly at random.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidSpecError
from .grids import SamplingMask


@dataclass(frozen=True)
class MaskSpec:
    """Column-sampling specification for one mask."""

    width: int
    acceleration: float
    center_alloc: float = 0.32
    seed: int = 0

    def __post_init__(self) -> None:
        if self.acceleration < 1:
            raise InvalidSpecError(f"acceleration must be >= 1, got {self.acceleration}")
        if not 0.0 <= self.center_alloc <= 1.0:
            raise InvalidSpecError(f"center_alloc must be in [0, 1], got {self.center_alloc}")
        if self.width < self.acceleration:
            raise InvalidSpecError(
                f"width {self.width} must be >= acceleration {self.acceleration}"
            )


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def column_counts(spec: MaskSpec) -> tuple[int, int]:
    """Return (total sampled columns, low-frequency block size)."""
    total = _round_half_up(spec.width / spec.acceleration)
    n_low = _round_half_up(spec.center_alloc * total)
    if n_low > total:
        raise InvalidSpecError(f"low-frequency block {n_low} exceeds total budget {total}")
    return total, n_low


def _center_block(width: int, n_low: int) -> np.ndarray:
    start = width // 2 - n_low // 2
    cols = np.zeros(width, dtype=bool)
    cols[start : start + n_low] = True
    return cols


def equispaced_mask(spec: MaskSpec, height: int) -> SamplingMask:
    """Deterministic mask: centered block plus evenly spaced outer columns."""
    total, n_low = column_counts(spec)
    cols = _center_block(spec.width, n_low)
    n_rest = total - n_low
    if n_rest > 0:
        candidates = np.flatnonzero(~cols)
        picks = (np.arange(n_rest) * len(candidates)) // n_rest
        cols[candidates[picks]] = True
    return SamplingMask(height, cols)


def random_mask(spec: MaskSpec, height: int) -> SamplingMask:
    """Seeded mask: centered block plus outer columns drawn without replacement."""
    total, n_low = column_counts(spec)
    cols = _center_block(spec.width, n_low)
    n_rest = total - n_low
    if n_rest > 0:
        candidates = np.flatnonzero(~cols)
        rng = np.random.default_rng(spec.seed)
        picks = rng.choice(len(candidates), size=n_rest, replace=False)
        cols[candidates[picks]] = True
    return SamplingMask(height, cols)
