"""Image quality metrics on magnitude images: PSNR, SSIM, MAE."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import convolve2d

from .errors import DimensionError, InvalidParameterError

PSNR_CAP_DB = 100.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


@dataclass(frozen=True)
class MetricReport:
    psnr: float
    ssim: float
    mae: float


def _as_real_2d(a, what: str) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise DimensionError(f"{what} must be a 2-D magnitude image, got shape {a.shape}")
    return a


def _check_pair(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"image shapes differ: {a.shape} vs {b.shape}")


def psnr(a, b, data_range: float) -> float:
    """Peak signal-to-noise ratio in dB, capped at 100 so outputs stay finite."""
    a = _as_real_2d(a, "first image")
    b = _as_real_2d(b, "second image")
    _check_pair(a, b)
    if data_range <= 0:
        raise InvalidParameterError(f"data_range must be > 0, got {data_range}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(10.0 * np.log10(data_range**2 / mse), PSNR_CAP_DB)


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    offsets = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(offsets**2) / (2.0 * sigma**2))
    kernel = np.outer(g, g)
    return kernel / kernel.sum()


def ssim(a, b, data_range: float) -> float:
    """Mean local SSIM with an 11x11 Gaussian window (sigma 1.5), K1=0.01, K2=0.03.

    Local statistics use fully interior windows only, so images must be at
    least 11x11.
    """
    a = _as_real_2d(a, "first image")
    b = _as_real_2d(b, "second image")
    _check_pair(a, b)
    if data_range <= 0:
        raise InvalidParameterError(f"data_range must be > 0, got {data_range}")
    if a.shape[0] < SSIM_WINDOW or a.shape[1] < SSIM_WINDOW:
        raise DimensionError(
            f"images must be at least {SSIM_WINDOW}x{SSIM_WINDOW} for SSIM, got {a.shape}"
        )
    w = _gaussian_window(SSIM_WINDOW, SSIM_SIGMA)
    mu_a = convolve2d(a, w, mode="valid")
    mu_b = convolve2d(b, w, mode="valid")
    var_a = convolve2d(a * a, w, mode="valid") - mu_a**2
    var_b = convolve2d(b * b, w, mode="valid") - mu_b**2
    cov = convolve2d(a * b, w, mode="valid") - mu_a * mu_b
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2
    ssim_map = ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) / (
        (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    )
    return float(ssim_map.mean())


def mae(a, b) -> float:
    """Mean absolute error."""
    a = _as_real_2d(a, "first image")
    b = _as_real_2d(b, "second image")
    _check_pair(a, b)
    return float(np.mean(np.abs(a - b)))


def evaluate(a, b, data_range: float) -> MetricReport:
    """All three metrics of `a` against reference `b` in one report."""
    return MetricReport(psnr=psnr(a, b, data_range), ssim=ssim(a, b, data_range), mae=mae(a, b))
