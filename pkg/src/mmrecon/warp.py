"""Displacement-field warping and field construction utilities.

Warping is backward: output(p) = input(p + field(p)), with bilinear
interpolation and border clamping. Control-point fields are upsampled
with a separable Catmull-Rom bicubic kernel (a = -0.5).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, InvalidParameterError
from .grids import ComplexImage, DisplacementField, check_same_shape

CONTROL_POINTS = 9


@dataclass(frozen=True)
class ControlGrid:
    """Coarse lattice of displacements, bicubically upsampled to pixel fields."""

    dx: np.ndarray
    dy: np.ndarray

    def __post_init__(self) -> None:
        dx = np.array(self.dx, dtype=np.float64, copy=True)
        dy = np.array(self.dy, dtype=np.float64, copy=True)
        for name, arr in (("dx", dx), ("dy", dy)):
            if arr.shape != (CONTROL_POINTS, CONTROL_POINTS):
                raise DimensionError(
                    f"control grid {name} must be {CONTROL_POINTS}x{CONTROL_POINTS}, got {arr.shape}"
                )
        dx.flags.writeable = False
        dy.flags.writeable = False
        object.__setattr__(self, "dx", dx)
        object.__setattr__(self, "dy", dy)


def bilinear_sample(arr: np.ndarray, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """Sample a real 2-D array at fractional coordinates, clamping at borders."""
    h, w = arr.shape
    r = np.clip(rows, 0.0, h - 1.0)
    c = np.clip(cols, 0.0, w - 1.0)
    r0 = np.minimum(np.floor(r).astype(np.intp), h - 2)
    c0 = np.minimum(np.floor(c).astype(np.intp), w - 2)
    fr = r - r0
    fc = c - c0
    a00 = arr[r0, c0]
    a01 = arr[r0, c0 + 1]
    a10 = arr[r0 + 1, c0]
    a11 = arr[r0 + 1, c0 + 1]
    # explicit convex weights: exact at integer coordinates
    return (
        (1.0 - fr) * (1.0 - fc) * a00
        + (1.0 - fr) * fc * a01
        + fr * (1.0 - fc) * a10
        + fr * fc * a11
    )


def bilinear_sample_with_grad(
    arr: np.ndarray, rows: np.ndarray, cols: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Sample and return (values, d/drow, d/dcol) of the interpolant.

    The derivatives are the interpolant's one-sided cell derivatives; they
    vanish where the coordinate is clamped outside the grid.
    """
    h, w = arr.shape
    r = np.clip(rows, 0.0, h - 1.0)
    c = np.clip(cols, 0.0, w - 1.0)
    r0 = np.minimum(np.floor(r).astype(np.intp), h - 2)
    c0 = np.minimum(np.floor(c).astype(np.intp), w - 2)
    fr = r - r0
    fc = c - c0
    a00 = arr[r0, c0]
    a01 = arr[r0, c0 + 1]
    a10 = arr[r0 + 1, c0]
    a11 = arr[r0 + 1, c0 + 1]
    val = (
        (1.0 - fr) * (1.0 - fc) * a00
        + (1.0 - fr) * fc * a01
        + fr * (1.0 - fc) * a10
        + fr * fc * a11
    )
    d_row = (1.0 - fc) * (a10 - a00) + fc * (a11 - a01)
    d_col = (1.0 - fr) * (a01 - a00) + fr * (a11 - a10)
    inside_r = (rows > 0.0) & (rows < h - 1.0)
    inside_c = (cols > 0.0) & (cols < w - 1.0)
    return val, d_row * inside_r, d_col * inside_c


def _sample_grid(field: DisplacementField) -> tuple[np.ndarray, np.ndarray]:
    h, w = field.shape
    rows, cols = np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij")
    return rows + field.dy, cols + field.dx


def warp(img: ComplexImage, field: DisplacementField) -> ComplexImage:
    """Backward-warp an image: output(p) = img(p + field(p))."""
    check_same_shape(img, field, "image and field")
    rows, cols = _sample_grid(field)
    re = bilinear_sample(img.data.real, rows, cols)
    im = bilinear_sample(img.data.imag, rows, cols)
    return ComplexImage(re + 1j * im)


def warp_real(arr: np.ndarray, field: DisplacementField) -> np.ndarray:
    """Backward-warp a real array with the same convention as :func:`warp`."""
    if arr.shape != field.shape:
        raise DimensionError(f"array shape {arr.shape} != field shape {field.shape}")
    rows, cols = _sample_grid(field)
    return bilinear_sample(arr, rows, cols)


def affine_to_field(theta: float, t: tuple[float, float], shape: tuple[int, int]) -> DisplacementField:
    """Displacement field of a rotation about the image center plus a translation.

    field(p) = R_theta(p - center) + center + t - p, with the center at
    pixel ((H-1)/2, (W-1)/2) and t = (dx, dy) in pixels.
    """
    if not abs(theta) < np.pi:
        raise InvalidParameterError(f"|theta| must be < pi, got {theta}")
    h, w = shape
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    rows, cols = np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij")
    xr = cols - cx
    yr = rows - cy
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    dx = cos_t * xr - sin_t * yr + cx + t[0] - cols
    dy = sin_t * xr + cos_t * yr + cy + t[1] - rows
    return DisplacementField(dx, dy)


def _catmull_rom_weights(f: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    f2 = f * f
    f3 = f2 * f
    w_m1 = -0.5 * f3 + f2 - 0.5 * f
    w_0 = 1.5 * f3 - 2.5 * f2 + 1.0
    w_1 = -1.5 * f3 + 2.0 * f2 + 0.5 * f
    w_2 = 0.5 * f3 - 0.5 * f2
    return w_m1, w_0, w_1, w_2


def _cr_interp_axis0(values: np.ndarray, coords: np.ndarray) -> np.ndarray:
    """Catmull-Rom interpolation of `values` (n, k) along axis 0 at `coords` (m,).

    Border control points are replicated for the outer stencil taps.
    """
    n = values.shape[0]
    i0 = np.clip(np.floor(coords).astype(np.intp), 0, n - 1)
    f = coords - i0
    w = _catmull_rom_weights(f)
    out = np.zeros((coords.shape[0],) + values.shape[1:], dtype=values.dtype)
    for tap, wt in zip((-1, 0, 1, 2), w):
        idx = np.clip(i0 + tap, 0, n - 1)
        out += wt[:, None] * values[idx]
    return out


def upsample_bicubic(grid: ControlGrid, shape: tuple[int, int]) -> DisplacementField:
    """Upsample a control lattice spanning the full image extent to a pixel field."""
    h, w = shape
    if h < CONTROL_POINTS or w < CONTROL_POINTS:
        raise DimensionError(
            f"target shape {shape} must be at least {CONTROL_POINTS}x{CONTROL_POINTS}"
        )
    n = CONTROL_POINTS
    row_coords = np.arange(h, dtype=np.float64) * (n - 1) / (h - 1)
    col_coords = np.arange(w, dtype=np.float64) * (n - 1) / (w - 1)
    planes = []
    for plane in (grid.dx, grid.dy):
        rows_up = _cr_interp_axis0(plane, row_coords)
        full = _cr_interp_axis0(rows_up.T, col_coords).T
        planes.append(full)
    return DisplacementField(planes[0], planes[1])


def compose(outer: DisplacementField, inner: DisplacementField) -> DisplacementField:
    """Combine fields so warping with the result applies `outer` first, then `inner`.

    composed(p) = inner(p) + outer(p + inner(p)), with bilinear lookup of
    the outer field.
    """
    check_same_shape(outer, inner, "outer and inner fields")
    rows, cols = _sample_grid(inner)
    dx = inner.dx + bilinear_sample(outer.dx, rows, cols)
    dy = inner.dy + bilinear_sample(outer.dy, rows, cols)
    return DisplacementField(dx, dy)


def invert_field(field: DisplacementField, iters: int = 40) -> DisplacementField:
    """Fixed-point inverse: returns g with g(p) = -field(p + g(p)).

    Warping an image by `field` and the result by the inverse recovers the
    original away from borders, for moderate fields.
    """
    h, w = field.shape
    rows, cols = np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij")
    gx = np.zeros((h, w))
    gy = np.zeros((h, w))
    for _ in range(iters):
        sx = -bilinear_sample(field.dx, rows + gy, cols + gx)
        sy = -bilinear_sample(field.dy, rows + gy, cols + gx)
        gx, gy = sx, sy
    return DisplacementField(gx, gy)
