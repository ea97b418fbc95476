"""Block-Hankel lifting of multishot k-space data and the filterbank algebra.

``lift`` stacks one Hankel block per shot, so that ``lift(z).matrix @ s``
equals the sum over shots of valid 2D linear convolutions of each shot's
k-space with the corresponding sub-filter of ``s``. Rows are indexed by the
positions where the filter support fits entirely inside the grid (erosion
count), so the commutation identity between lifted-signal and lifted-filter
forms holds exactly.

A FilterBank holds the columns of the IRLS weight matrix; applying it as a
multichannel convolution bank and applying its adjoint (flipped-conjugate
convolutions back onto the grid) are the two operations the solvers use.
"""

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.signal import convolve2d

from .errors import DimensionError


@dataclass(frozen=True)
class FilterSupport:
    """Rectangular filter support: odd positive (rows, cols)."""

    rows: int
    cols: int

    def __post_init__(self):
        for n in (self.rows, self.cols):
            if n < 1 or n % 2 == 0:
                raise ValueError(f"filter support must be odd positive, got {self}")

    @property
    def size(self) -> int:
        return self.rows * self.cols

    def valid_shape(self, grid_shape) -> tuple:
        vr = grid_shape[0] - self.rows + 1
        vc = grid_shape[1] - self.cols + 1
        if vr < 1 or vc < 1:
            raise DimensionError(f"support {self} does not fit in grid {grid_shape}")
        return vr, vc


@dataclass(frozen=True)
class HankelLift:
    """Dense lifted matrix of shape (valid positions, n_shots * support size)."""

    matrix: np.ndarray
    grid_shape: tuple
    support: FilterSupport
    n_shots: int


@dataclass(frozen=True)
class FilterBank:
    """K filter columns, each splitting into one sub-filter per shot.

    ``matrix`` has shape (n_shots * support size, K); sub-filter (k, i) is
    ``matrix[i * size : (i + 1) * size, k]`` reshaped to the support.
    """

    matrix: np.ndarray
    support: FilterSupport
    n_shots: int

    def __post_init__(self):
        if self.matrix.shape[0] != self.n_shots * self.support.size:
            raise DimensionError(
                f"filterbank rows {self.matrix.shape[0]} != "
                f"{self.n_shots} shots x {self.support.size} taps")

    @property
    def n_filters(self) -> int:
        return self.matrix.shape[1]

    def sub_filter(self, k: int, shot: int) -> np.ndarray:
        size = self.support.size
        col = self.matrix[shot * size:(shot + 1) * size, k]
        return col.reshape(self.support.rows, self.support.cols)


def _check_kspace_stack(zhat):
    zhat = np.asarray(zhat, dtype=np.complex128)
    if zhat.ndim != 3:
        raise DimensionError("expected a (n_shots, rows, cols) k-space stack")
    return zhat


def lift(zhat: np.ndarray, support: FilterSupport) -> HankelLift:
    """Lift a multishot k-space stack to its block-Hankel matrix."""
    zhat = _check_kspace_stack(zhat)
    grid = zhat.shape[1:]
    vr, vc = support.valid_shape(grid)
    blocks = []
    for i in range(zhat.shape[0]):
        win = sliding_window_view(zhat[i], (support.rows, support.cols))
        # flip taps so that matrix @ filter is a true (valid) convolution
        blocks.append(win[:, :, ::-1, ::-1].reshape(vr * vc, support.size))
    return HankelLift(np.hstack(blocks), grid, support, zhat.shape[0])


def lift_adjoint(matrix: np.ndarray, grid_shape, support: FilterSupport,
                 n_shots: int) -> np.ndarray:
    """Adjoint of the lifting: scatter matrix entries back onto shot grids."""
    matrix = np.asarray(matrix, dtype=np.complex128)
    vr, vc = support.valid_shape(grid_shape)
    size = support.size
    if matrix.shape != (vr * vc, n_shots * size):
        raise DimensionError(
            f"matrix shape {matrix.shape} incompatible with "
            f"grid {tuple(grid_shape)}, support {support}, {n_shots} shots")
    out = np.zeros((n_shots,) + tuple(grid_shape), dtype=np.complex128)
    for i in range(n_shots):
        blk = matrix[:, i * size:(i + 1) * size].reshape(vr, vc, support.rows, support.cols)
        blk = blk[:, :, ::-1, ::-1]
        for a in range(support.rows):
            for b in range(support.cols):
                out[i, a:a + vr, b:b + vc] += blk[:, :, a, b]
    return out


def gram(zhat: np.ndarray, support: FilterSupport) -> np.ndarray:
    """Gram matrix of the lift: lift(z)^H lift(z), Hermitian PSD."""
    m = lift(zhat, support).matrix
    g = m.conj().T @ m
    return 0.5 * (g + g.conj().T)


def apply_filterbank(zhat: np.ndarray, bank: FilterBank) -> np.ndarray:
    """Multichannel valid convolution of the shots with every filter column.

    Returns a (K, valid rows, valid cols) response stack; column-by-column
    this equals lift(zhat).matrix @ bank.matrix.
    """
    zhat = _check_kspace_stack(zhat)
    if zhat.shape[0] != bank.n_shots:
        raise DimensionError(
            f"stack has {zhat.shape[0]} shots, filterbank expects {bank.n_shots}")
    vr, vc = bank.support.valid_shape(zhat.shape[1:])
    resp = np.zeros((bank.n_filters, vr, vc), dtype=np.complex128)
    for k in range(bank.n_filters):
        for i in range(bank.n_shots):
            resp[k] += convolve2d(zhat[i], bank.sub_filter(k, i), mode="valid")
    return resp


def filterbank_adjoint(resp: np.ndarray, bank: FilterBank, grid_shape) -> np.ndarray:
    """Adjoint of :func:`apply_filterbank`: flipped-conjugate convolutions."""
    resp = np.asarray(resp, dtype=np.complex128)
    vr, vc = bank.support.valid_shape(grid_shape)
    if resp.shape != (bank.n_filters, vr, vc):
        raise DimensionError(
            f"response stack {resp.shape} != ({bank.n_filters}, {vr}, {vc})")
    out = np.zeros((bank.n_shots,) + tuple(grid_shape), dtype=np.complex128)
    for k in range(bank.n_filters):
        for i in range(bank.n_shots):
            q = bank.sub_filter(k, i)
            out[i] += convolve2d(resp[k], np.conj(q[::-1, ::-1]), mode="full")
    return out


def residual_project(zhat: np.ndarray, bank: FilterBank, weight: float) -> np.ndarray:
    """One residual annihilation step: zhat - weight * G^H G zhat."""
    if weight < 0:
        raise ValueError("weight must be >= 0")
    zhat = _check_kspace_stack(zhat)
    if weight == 0 or bank.n_filters == 0:
        return zhat.copy()
    resp = apply_filterbank(zhat, bank)
    return zhat - weight * filterbank_adjoint(resp, bank, zhat.shape[1:])
