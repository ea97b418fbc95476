"""Multi-coil, multishot SENSE acquisition operator.

The operator maps a stack of shot images rho (N, H, W) to per-shot, per-coil
k-space samples (N, C, H, W): each shot is multiplied by every coil
sensitivity, Fourier transformed, and restricted to that shot's sampling
mask. K-space arrays keep the full grid with zeros off-mask.

All applications broadcast over arbitrary leading batch axes.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .fourier import fft2c, ifft2c

SOS_TOL = 1e-6


@dataclass(frozen=True)
class AcquisitionOperator:
    """Immutable coil maps (C, H, W) plus per-shot sampling masks (N, H, W).

    Coil maps must be sum-of-squares normalized (sum_j |s_j|^2 = 1 at every
    pixel, within 1e-6); they are validated, never silently renormalized.
    Masks must be binary, pairwise disjoint, and cover the full grid, as in
    interleaved multishot EPI sampling.
    """

    coil_maps: np.ndarray
    shot_masks: np.ndarray

    def __post_init__(self):
        maps = np.asarray(self.coil_maps, dtype=np.complex128)
        masks = np.asarray(self.shot_masks, dtype=np.float64)
        if maps.ndim != 3 or masks.ndim != 3:
            raise DimensionError("coil maps and shot masks must be 3D stacks")
        if maps.shape[1:] != masks.shape[1:]:
            raise DimensionError(
                f"coil grid {maps.shape[1:]} != mask grid {masks.shape[1:]}")
        sos = (np.abs(maps) ** 2).sum(axis=0)
        dev = np.abs(sos - 1.0).max()
        if dev > SOS_TOL:
            raise ValueError(
                f"coil maps are not SOS-normalized (max deviation {dev:.3g})")
        if not np.all((masks == 0) | (masks == 1)):
            raise ValueError("shot masks must be binary")
        cover = masks.sum(axis=0)
        if np.any(cover == 0):
            raise ValueError("union of shot masks does not cover the k-space grid")
        if np.any(cover > 1):
            raise ValueError("shot masks overlap; interleaved sampling must be disjoint")
        object.__setattr__(self, "coil_maps", maps)
        object.__setattr__(self, "shot_masks", masks)

    @property
    def n_shots(self) -> int:
        return self.shot_masks.shape[0]

    @property
    def n_coils(self) -> int:
        return self.coil_maps.shape[0]

    @property
    def grid_shape(self) -> tuple:
        return self.shot_masks.shape[1:]

    def _check_image(self, rho):
        expect = (self.n_shots,) + self.grid_shape
        if rho.shape[-3:] != expect:
            raise DimensionError(f"image stack {rho.shape} does not end in {expect}")

    def _check_kspace(self, y):
        expect = (self.n_shots, self.n_coils) + self.grid_shape
        if y.shape[-4:] != expect:
            raise DimensionError(f"k-space stack {y.shape} does not end in {expect}")

    def forward(self, rho: np.ndarray) -> np.ndarray:
        """Apply the acquisition: (..., N, H, W) -> (..., N, C, H, W)."""
        rho = np.asarray(rho, dtype=np.complex128)
        self._check_image(rho)
        coil_imgs = self.coil_maps * rho[..., :, None, :, :]
        return self.shot_masks[:, None] * fft2c(coil_imgs)

    def adjoint(self, y: np.ndarray) -> np.ndarray:
        """Apply the adjoint: (..., N, C, H, W) -> (..., N, H, W)."""
        y = np.asarray(y, dtype=np.complex128)
        self._check_kspace(y)
        coil_imgs = ifft2c(self.shot_masks[:, None] * y)
        return (np.conj(self.coil_maps) * coil_imgs).sum(axis=-3)

    def normal(self, rho: np.ndarray, shift: float = 0.0) -> np.ndarray:
        """Return adjoint(forward(rho)) + shift * rho.

        Hermitian PSD as an operator; strictly positive definite for
        shift > 0.
        """
        if shift < 0:
            raise ValueError("shift must be >= 0")
        return self.adjoint(self.forward(rho)) + shift * np.asarray(rho)
