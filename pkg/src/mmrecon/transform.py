"""Centered orthonormal 2-D Fourier transforms and the masked acquisition operator.

Both transform directions carry the 1/sqrt(H*W) scaling, so the inverse
equals the adjoint and energy is preserved exactly. The DC coefficient
sits at bin (H//2, W//2) for even and odd sizes alike.
"""

from __future__ import annotations

import numpy as np

from .grids import ComplexImage, KSpace, SamplingMask, check_same_shape


def fft2c(img: ComplexImage) -> KSpace:
    """Centered orthonormal forward 2-D FFT."""
    k = np.fft.fftshift(np.fft.fft2(np.fft.ifftshift(img.data), norm="ortho"))
    return KSpace(k)


def ifft2c(k: KSpace) -> ComplexImage:
    """Centered orthonormal inverse 2-D FFT; exact inverse of :func:`fft2c`."""
    x = np.fft.fftshift(np.fft.ifft2(np.fft.ifftshift(k.data), norm="ortho"))
    return ComplexImage(x)


def forward_masked(img: ComplexImage, m: SamplingMask) -> KSpace:
    """Masked Fourier acquisition: FFT of the image, zeroed at unsampled bins."""
    check_same_shape(img, m, "image and mask")
    return KSpace(fft2c(img).data * m.as_array())


def adjoint_masked(k: KSpace, m: SamplingMask) -> ComplexImage:
    """Adjoint of :func:`forward_masked`: inverse FFT of the mask-zeroed grid.

    Applied to acquired k-space this is the zero-filled reconstruction.
    """
    check_same_shape(k, m, "k-space and mask")
    return ifft2c(KSpace(k.data * m.as_array()))
