"""PSNR and SSIM on magnitude images, per shot and shot-averaged."""

from dataclasses import dataclass

import numpy as np
from scipy.signal import convolve2d

from .errors import DimensionError

PSNR_SENTINEL = 300.0  # finite stand-in for a zero-MSE comparison
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


@dataclass
class MetricReport:
    per_shot_psnr: list
    per_shot_ssim: list
    mean_psnr: float
    mean_ssim: float


def _magnitude(x):
    x = np.asarray(x)
    return np.abs(x) if np.iscomplexobj(x) else x.astype(np.float64)


def psnr(x: np.ndarray, y: np.ndarray) -> float:
    """10 log10(max(x)^2 / MSE), on magnitudes; 300 dB saturation at MSE 0.

    x is the reference and supplies the peak value.
    """
    x, y = _magnitude(x), _magnitude(y)
    if x.shape != y.shape:
        raise DimensionError(f"shape mismatch {x.shape} vs {y.shape}")
    peak = x.max()
    if peak <= 0:
        raise ValueError("reference image must not be all zero")
    mse = float(np.mean((x - y) ** 2))
    if mse == 0.0:
        return PSNR_SENTINEL
    return float(min(PSNR_SENTINEL, 10.0 * np.log10(peak ** 2 / mse)))


def _gaussian_window(size=SSIM_WINDOW, sigma=SSIM_SIGMA):
    r = np.arange(size) - (size - 1) / 2
    g = np.exp(-(r ** 2) / (2 * sigma ** 2))
    win = np.outer(g, g)
    return win / win.sum()


def ssim(x: np.ndarray, y: np.ndarray) -> float:
    """Mean local SSIM with an 11x11 Gaussian window (sigma 1.5).

    Dynamic range is taken from the reference x, which makes the score
    formally asymmetric; stabilizers follow the standard constants.
    """
    x, y = _magnitude(x), _magnitude(y)
    if x.shape != y.shape:
        raise DimensionError(f"shape mismatch {x.shape} vs {y.shape}")
    if min(x.shape) < SSIM_WINDOW:
        raise DimensionError(f"images must be at least {SSIM_WINDOW} pixels per side")
    dyn = x.max()
    if dyn <= 0:
        dyn = 1.0
    c1 = (SSIM_K1 * dyn) ** 2
    c2 = (SSIM_K2 * dyn) ** 2
    win = _gaussian_window()
    mu_x = convolve2d(x, win, mode="valid")
    mu_y = convolve2d(y, win, mode="valid")
    xx = convolve2d(x * x, win, mode="valid")
    yy = convolve2d(y * y, win, mode="valid")
    xy = convolve2d(x * y, win, mode="valid")
    var_x = xx - mu_x ** 2
    var_y = yy - mu_y ** 2
    cov = xy - mu_x * mu_y
    s = ((2 * mu_x * mu_y + c1) * (2 * cov + c2)) \
        / ((mu_x ** 2 + mu_y ** 2 + c1) * (var_x + var_y + c2))
    return float(s.mean())


def report(truth: np.ndarray, recon: np.ndarray) -> MetricReport:
    """Per-shot PSNR/SSIM on magnitudes plus their arithmetic means."""
    truth = np.asarray(truth)
    recon = np.asarray(recon)
    if truth.shape != recon.shape:
        raise DimensionError(f"shot stacks differ: {truth.shape} vs {recon.shape}")
    psnrs = [psnr(t, r) for t, r in zip(truth, recon)]
    ssims = [ssim(t, r) for t, r in zip(truth, recon)]
    return MetricReport(psnrs, ssims, float(np.mean(psnrs)), float(np.mean(ssims)))
