"""Bit-exact file formats for grids plus PNG and CSV export.

GridFile layout (21-byte header, little-endian):
    bytes 0-7    magic "MRGRID01"
    byte  8      dtype code: 1 = real float64, 2 = complex float64
                 (interleaved re/im), 3 = boolean byte
    bytes 9-12   planes (u32)
    bytes 13-16  height (u32)
    bytes 17-20  width (u32)
    bytes 21-    payload, row-major within each plane, plane-major
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Sequence, Union

import numpy as np
from PIL import Image

from .errors import FormatError, InvalidInputError
from .grids import ComplexImage, DisplacementField, KSpace, SamplingMask
from .metrics import MetricReport

MAGIC = b"MRGRID01"
HEADER = struct.Struct("<8sBIII")

DTYPE_REAL = 1
DTYPE_COMPLEX = 2
DTYPE_BOOL = 3

_DTYPE_SIZE = {DTYPE_REAL: 8, DTYPE_COMPLEX: 16, DTYPE_BOOL: 1}

GridObject = Union[ComplexImage, KSpace, SamplingMask, DisplacementField, np.ndarray]


def _payload(obj: GridObject) -> tuple[int, int, int, int, bytes]:
    if isinstance(obj, (ComplexImage, KSpace)):
        h, w = obj.shape
        return DTYPE_COMPLEX, 1, h, w, obj.data.astype("<c16").tobytes()
    if isinstance(obj, DisplacementField):
        h, w = obj.shape
        return DTYPE_REAL, 2, h, w, obj.dx.astype("<f8").tobytes() + obj.dy.astype("<f8").tobytes()
    if isinstance(obj, SamplingMask):
        h, w = obj.shape
        return DTYPE_BOOL, 1, h, w, obj.as_array().astype(np.uint8).tobytes()
    if isinstance(obj, np.ndarray):
        if obj.ndim != 2 or np.iscomplexobj(obj):
            raise InvalidInputError("bare arrays must be real and 2-D; wrap complex grids")
        h, w = obj.shape
        return DTYPE_REAL, 1, h, w, obj.astype("<f8").tobytes()
    raise InvalidInputError(f"unsupported grid object type {type(obj).__name__}")


def grid_bytes(obj: GridObject) -> bytes:
    """Serialize a grid object to the GridFile byte layout."""
    dtype, planes, h, w, payload = _payload(obj)
    return HEADER.pack(MAGIC, dtype, planes, h, w) + payload


def write_grid(path, obj: GridObject) -> None:
    """Write a grid object; read_grid inverts this bit-exactly."""
    Path(path).write_bytes(grid_bytes(obj))


def grid_from_bytes(blob: bytes) -> GridObject:
    """Parse GridFile bytes back into the matching object.

    Complex grids always come back as ComplexImage; rewrap as KSpace at
    the call site when the grid is frequency-domain data.
    """
    if len(blob) < HEADER.size:
        raise FormatError(f"truncated header: expected {HEADER.size} bytes, got {len(blob)}")
    magic, dtype, planes, h, w = HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise FormatError(f"bad magic at byte offset 0: {magic!r}")
    if dtype not in _DTYPE_SIZE:
        raise FormatError(f"unknown dtype code {dtype} at byte offset 8")
    expected = planes * h * w * _DTYPE_SIZE[dtype]
    actual = len(blob) - HEADER.size
    if actual != expected:
        raise FormatError(
            f"payload length mismatch at byte offset {HEADER.size}: expected {expected}, got {actual}"
        )
    body = blob[HEADER.size :]
    if dtype == DTYPE_COMPLEX:
        if planes != 1:
            raise FormatError(f"complex grids must have 1 plane, got {planes}")
        data = np.frombuffer(body, dtype="<c16").reshape(h, w)
        return ComplexImage(data)
    if dtype == DTYPE_BOOL:
        if planes != 1:
            raise FormatError(f"mask grids must have 1 plane, got {planes}")
        grid = np.frombuffer(body, dtype=np.uint8).reshape(h, w).astype(bool)
        if not np.all(grid == grid[0]):
            raise FormatError("mask grid is not constant along columns")
        return SamplingMask(h, grid[0])
    data = np.frombuffer(body, dtype="<f8").reshape(planes, h, w)
    if planes == 1:
        return data[0].copy()
    if planes == 2:
        return DisplacementField(data[0], data[1])
    raise FormatError(f"real grids must have 1 or 2 planes, got {planes}")


def read_grid(path) -> GridObject:
    return grid_from_bytes(Path(path).read_bytes())


def _to_real_array(obj) -> np.ndarray:
    if isinstance(obj, (ComplexImage, KSpace)):
        return np.abs(obj.data)
    if isinstance(obj, SamplingMask):
        return obj.as_array().astype(np.float64)
    arr = np.asarray(obj, dtype=np.float64)
    if arr.ndim != 2:
        raise InvalidInputError(f"PNG export needs a 2-D grid, got shape {arr.shape}")
    return arr


def export_png(obj, path, colormap: str = "gray") -> None:
    """8-bit grayscale PNG: min-max normalized, or symmetric about zero for error maps."""
    data = _to_real_array(obj)
    if not np.all(np.isfinite(data)):
        raise InvalidInputError("PNG export requires finite data")
    if colormap == "gray":
        lo, hi = float(data.min()), float(data.max())
        if hi == lo:
            pixels = np.full(data.shape, 128, dtype=np.uint8)
        else:
            pixels = np.round((data - lo) / (hi - lo) * 255.0).astype(np.uint8)
    elif colormap == "signed":
        peak = float(np.max(np.abs(data)))
        if peak == 0:
            pixels = np.full(data.shape, 128, dtype=np.uint8)
        else:
            pixels = np.clip(np.round(data / peak * 127.5 + 127.5), 0, 255).astype(np.uint8)
    else:
        raise InvalidInputError(f"unknown colormap {colormap!r}; use 'gray' or 'signed'")
    Image.fromarray(pixels, mode="L").save(Path(path), format="PNG")


def write_metrics_csv(rows: Sequence[tuple[str, MetricReport]], path) -> None:
    """CSV with header label,psnr_db,ssim,mae; six decimals, LF line endings."""
    lines = ["label,psnr_db,ssim,mae"]
    for label, report in rows:
        lines.append(f"{label},{report.psnr:.6f},{report.ssim:.6f},{report.mae:.6f}")
    Path(path).write_bytes(("\n".join(lines) + "\n").encode("utf-8"))
