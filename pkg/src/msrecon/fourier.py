"""Centered orthonormal 2D Fourier transforms.

Both directions use the same shift structure (fftshift(FFT(ifftshift(x)))),
which makes the pair exact inverses and exact adjoints on even and odd grid
sizes alike. The DC sample sits at index (rows // 2, cols // 2).
"""

import numpy as np
from numpy.fft import fft2, fftshift, ifft2, ifftshift


def fft2c(img: np.ndarray, axes=(-2, -1)) -> np.ndarray:
    """Centered orthonormal 2D FFT over the trailing two axes."""
    return fftshift(fft2(ifftshift(img, axes=axes), axes=axes, norm="ortho"), axes=axes)


def ifft2c(spec: np.ndarray, axes=(-2, -1)) -> np.ndarray:
    """Inverse of :func:`fft2c`; also its adjoint (the transform is unitary)."""
    return fftshift(ifft2(ifftshift(spec, axes=axes), axes=axes, norm="ortho"), axes=axes)
