"""Ground-truth phantoms, k-space acquisition, and misalignment simulation.

Phantom pairs share one region geometry (a disc plus random ellipses) with
two independent piecewise-constant intensity maps, standing in for paired
MR contrasts. Edges are rendered with 4x supersampling and a one-pixel
Gaussian rolloff: MR images are band-limited, and spiky single-pixel
transitions would be an artifact of the grid, not the object.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from .errors import DimensionError, InvalidParameterError
from .grids import ComplexImage, DisplacementField, KSpace, SamplingMask, check_same_shape
from .transform import forward_masked
from .warp import CONTROL_POINTS, ControlGrid, affine_to_field, compose, upsample_bicubic, warp

MIN_PHANTOM_SIZE = 64
SUPERSAMPLE = 4
EDGE_SIGMA = 1.0

ROTATION_RANGE = 0.01 * np.pi  # radians per unit sigma
TRANSLATION_RANGE = 0.05  # fraction of image size per unit sigma
CONTROL_RANGE = 0.02  # fraction of image size per unit sigma


@dataclass(frozen=True)
class MisalignSpec:
    """Scale, image size, and seed of one simulated misalignment draw."""

    sigma: float
    size: int
    seed: int = 0

    def __post_init__(self) -> None:
        if self.sigma < 0:
            raise InvalidParameterError(f"sigma must be >= 0, got {self.sigma}")


@dataclass(frozen=True)
class PhantomPair:
    """Target/reference contrast pair over one shared region geometry."""

    target: ComplexImage
    reference: ComplexImage
    labels: np.ndarray
    seed: int

    def __post_init__(self) -> None:
        check_same_shape(self.target, self.reference, "target and reference")
        labels = np.array(self.labels, copy=True)
        labels.flags.writeable = False
        object.__setattr__(self, "labels", labels)


def _ellipse_mask(shape: tuple[int, int], cy, cx, ry, rx, angle) -> np.ndarray:
    rows, cols = np.meshgrid(
        np.arange(shape[0], dtype=np.float64), np.arange(shape[1], dtype=np.float64), indexing="ij"
    )
    yr = rows - cy
    xr = cols - cx
    ca, sa = np.cos(angle), np.sin(angle)
    u = ca * xr + sa * yr
    v = -sa * xr + ca * yr
    return (u / rx) ** 2 + (v / ry) ** 2 <= 1.0


def phantom_pair(size: int, seed: int) -> PhantomPair:
    """Random two-contrast phantom: 8-15 ellipses on a disc background.

    Deterministic per seed; values in [0, 1], zero imaginary part.
    """
    if size < MIN_PHANTOM_SIZE:
        raise DimensionError(f"phantom size must be >= {MIN_PHANTOM_SIZE}, got {size}")
    rng = np.random.default_rng(seed)
    hi = size * SUPERSAMPLE
    n_ell = int(rng.integers(8, 16))

    labels_hi = np.zeros((hi, hi), dtype=np.int32)
    center = (hi - 1) / 2.0
    disc_r = 0.45 * hi
    disc = _ellipse_mask((hi, hi), center, center, disc_r, disc_r, 0.0)
    labels_hi[disc] = 1
    for k in range(n_ell):
        ang_pos = rng.uniform(0.0, 2 * np.pi)
        rad_pos = rng.uniform(0.0, 0.62) * disc_r
        cy = center + rad_pos * np.sin(ang_pos)
        cx = center + rad_pos * np.cos(ang_pos)
        ry = rng.uniform(0.05, 0.22) * disc_r
        rx = rng.uniform(0.05, 0.22) * disc_r
        angle = rng.uniform(0.0, np.pi)
        ell = _ellipse_mask((hi, hi), cy, cx, ry, rx, angle) & disc
        labels_hi[ell] = k + 2

    n_labels = n_ell + 2
    values = np.zeros((2, n_labels))
    values[:, 1:] = rng.uniform(0.2, 1.0, size=(2, n_labels - 1))
    values /= values.max(axis=1, keepdims=True)

    images = []
    for contrast in values:
        img_hi = contrast[labels_hi]
        img = img_hi.reshape(size, SUPERSAMPLE, size, SUPERSAMPLE).mean(axis=(1, 3))
        images.append(gaussian_filter(img, EDGE_SIGMA, mode="nearest"))

    labels = labels_hi[SUPERSAMPLE // 2 :: SUPERSAMPLE, SUPERSAMPLE // 2 :: SUPERSAMPLE]
    return PhantomPair(
        target=ComplexImage.from_real(images[0]),
        reference=ComplexImage.from_real(images[1]),
        labels=labels,
        seed=seed,
    )


def acquire(x_gt: ComplexImage, m: SamplingMask, noise_sigma: float, seed: int = 0) -> KSpace:
    """Simulate acquisition: masked FFT plus complex Gaussian noise at sampled bins."""
    if noise_sigma < 0:
        raise InvalidParameterError(f"noise_sigma must be >= 0, got {noise_sigma}")
    check_same_shape(x_gt, m, "image and mask")
    k = forward_masked(x_gt, m).data
    if noise_sigma > 0:
        rng = np.random.default_rng(seed)
        noise = rng.normal(0.0, noise_sigma, k.shape) + 1j * rng.normal(0.0, noise_sigma, k.shape)
        k = k + noise * m.as_array()
    return KSpace(k)


def misalign(x_ref: ComplexImage, spec: MisalignSpec) -> tuple[ComplexImage, DisplacementField]:
    """Random misalignment: rotation, translation, and a bicubic free-form field.

    Draw order (fixed for reproducibility): rotation angle, translation
    (dx, dy), then the 9x9 control displacements (dx plane, dy plane).
    Ranges scale with sigma: rotation within 0.01*pi*sigma, translation
    within 0.05*N*sigma, control displacements within 0.02*N*sigma. The
    free-form warp is applied to the image first, then the affine one.
    """
    h, w = x_ref.shape
    if h != w or spec.size != h:
        raise DimensionError(
            f"misalign expects a square image matching spec.size; got {h}x{w}, size {spec.size}"
        )
    n = spec.size
    rng = np.random.default_rng(spec.seed)
    rot = ROTATION_RANGE * spec.sigma
    trans = TRANSLATION_RANGE * n * spec.sigma
    ctrl = CONTROL_RANGE * n * spec.sigma

    theta = rng.uniform(-rot, rot)
    t = rng.uniform(-trans, trans, size=2)
    ctrl_dx = rng.uniform(-ctrl, ctrl, size=(CONTROL_POINTS, CONTROL_POINTS))
    ctrl_dy = rng.uniform(-ctrl, ctrl, size=(CONTROL_POINTS, CONTROL_POINTS))

    affine = affine_to_field(theta, (t[0], t[1]), (h, w))
    free_form = upsample_bicubic(ControlGrid(ctrl_dx, ctrl_dy), (h, w))
    field = compose(free_form, affine)
    return warp(x_ref, field), field
