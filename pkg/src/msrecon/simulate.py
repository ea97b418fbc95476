"""Synthetic multishot diffusion data: phantoms, phases, coils, masks, noise.

Phase errors are unit-magnitude fields obtained by normalizing a random
bandlimited complex field pointwise; the normalization slightly broadens the
band, which is accepted because the unit-magnitude constraint is the hard
one. Coil maps are smooth Gaussian lobes at distinct border positions with
integer-bin linear phase ramps (so their spectra stay compact) and are
jointly sum-of-squares normalized. Sampling interleaves phase-encode lines
across shots. Every random quantity draws from a named stream of the spec's
seed.
"""

from dataclasses import dataclass, replace

import numpy as np

from .errors import DimensionError
from .forward import AcquisitionOperator
from .fourier import fft2c, ifft2c
from .rng import stream

# modified Shepp-Logan ellipses: intensity, half-axes, center, angle (deg)
_ELLIPSES = (
    (1.00, 0.6900, 0.9200, 0.00, 0.0000, 0),
    (-0.80, 0.6624, 0.8740, 0.00, -0.0184, 0),
    (-0.20, 0.1100, 0.3100, 0.22, 0.0000, -18),
    (-0.20, 0.1600, 0.4100, -0.22, 0.0000, 18),
    (0.10, 0.2100, 0.2500, 0.00, 0.3500, 0),
    (0.10, 0.0460, 0.0460, 0.00, 0.1000, 0),
    (0.10, 0.0460, 0.0460, 0.00, -0.1000, 0),
    (0.10, 0.0460, 0.0230, -0.08, -0.6050, 0),
    (0.10, 0.0230, 0.0230, 0.00, -0.6060, 0),
    (0.10, 0.0230, 0.0460, 0.06, -0.6050, 0),
)


@dataclass(frozen=True)
class SimSpec:
    grid: tuple
    n_shots: int = 4
    n_coils: int = 4
    phase_bandwidth: tuple = (3, 3)
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "grid", tuple(self.grid))
        object.__setattr__(self, "phase_bandwidth", tuple(self.phase_bandwidth))
        if self.n_shots < 1 or self.n_coils < 1:
            raise ValueError("n_shots and n_coils must be >= 1")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.n_shots > self.grid[0]:
            raise ValueError("more shots than phase-encode lines")
        pr, pc = self.phase_bandwidth
        if pr > self.grid[0] or pc > self.grid[1]:
            raise ValueError("phase bandwidth does not fit in the grid")

    def child(self, name: str) -> "SimSpec":
        """Spec with a derived seed, for per-example streams."""
        from .rng import child_seed
        return replace(self, seed=child_seed(self.seed, name))


def shepp_logan(shape) -> np.ndarray:
    """Piecewise-constant head phantom, clipped to non-negative values."""
    h, w = shape
    yy, xx = np.mgrid[0:h, 0:w]
    x = (xx - w / 2 + 0.5) / (w / 2)
    y = (yy - h / 2 + 0.5) / (h / 2)
    img = np.zeros(shape)
    for amp, a, b, x0, y0, ang in _ELLIPSES:
        th = np.deg2rad(ang)
        xr = (x - x0) * np.cos(th) + (y - y0) * np.sin(th)
        yr = -(x - x0) * np.sin(th) + (y - y0) * np.cos(th)
        img[(xr / a) ** 2 + (yr / b) ** 2 <= 1.0] += amp
    return np.clip(img, 0.0, None)


def random_phantom(shape, rng: np.random.Generator) -> np.ndarray:
    """Random piecewise-constant ellipse phantom with max intensity 1."""
    h, w = shape
    yy, xx = np.mgrid[0:h, 0:w]
    x = (xx - w / 2 + 0.5) / (w / 2)
    y = (yy - h / 2 + 0.5) / (h / 2)
    img = np.zeros(shape)
    # one head-sized ellipse plus a few internal features
    ellipses = [(0.8, 0.85, 0.85, 0.0, 0.0, 0.0)]
    for _ in range(int(rng.integers(3, 7))):
        ellipses.append((float(rng.uniform(-0.5, 0.5)),
                         float(rng.uniform(0.08, 0.45)),
                         float(rng.uniform(0.08, 0.45)),
                         float(rng.uniform(-0.45, 0.45)),
                         float(rng.uniform(-0.45, 0.45)),
                         float(rng.uniform(0, np.pi))))
    for amp, a, b, x0, y0, th in ellipses:
        xr = (x - x0) * np.cos(th) + (y - y0) * np.sin(th)
        yr = -(x - x0) * np.sin(th) + (y - y0) * np.cos(th)
        img[(xr / a) ** 2 + (yr / b) ** 2 <= 1.0] += amp
    img = np.clip(img, 0.0, None)
    peak = img.max()
    if peak > 0:
        img /= peak
    return img


def bandlimited_field(spec: SimSpec, shot_index: int) -> np.ndarray:
    """Complex field whose spectrum is exactly supported on the phase band."""
    rng = stream(spec.seed, f"phase/shot-{shot_index}")
    pr, pc = spec.phase_bandwidth
    coeff = rng.standard_normal((pr, pc)) + 1j * rng.standard_normal((pr, pc))
    k = np.zeros(spec.grid, dtype=np.complex128)
    cr, cc = spec.grid[0] // 2, spec.grid[1] // 2
    k[cr - pr // 2: cr + pr // 2 + 1, cc - pc // 2: cc + pc // 2 + 1] = coeff
    return ifft2c(k)


def gen_phase(spec: SimSpec, shot_index: int) -> np.ndarray:
    """Unit-magnitude smooth phase field for one shot."""
    g = bandlimited_field(spec, shot_index)
    mag = np.abs(g)
    return np.where(mag > 0, g / np.where(mag > 0, mag, 1.0), 1.0 + 0.0j)


def gen_coil_maps(spec: SimSpec) -> np.ndarray:
    """Smooth SOS-normalized coil sensitivities, (C, H, W)."""
    h, w = spec.grid
    yy, xx = np.mgrid[0:h, 0:w].astype(float)
    width = 1.0 * max(h, w)
    profiles = []
    for j in range(spec.n_coils):
        th = 2 * np.pi * j / spec.n_coils + 0.3
        cy = h / 2 + 0.52 * h * np.sin(th)
        cx = w / 2 + 0.52 * w * np.cos(th)
        lobe = np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * width ** 2))
        ky, kx = round(np.sin(th)), round(np.cos(th))
        phase = np.exp(1j * (2 * np.pi * (kx * xx / w + ky * yy / h) + th))
        profiles.append(lobe * phase)
    maps = np.stack(profiles)
    return maps / np.sqrt((np.abs(maps) ** 2).sum(axis=0, keepdims=True))


def gen_shot_masks(spec: SimSpec) -> np.ndarray:
    """Interleaved line masks: phase-encode line l belongs to shot l mod N."""
    masks = np.zeros((spec.n_shots,) + spec.grid)
    for line in range(spec.grid[0]):
        masks[line % spec.n_shots, line, :] = 1.0
    return masks


def make_operator(spec: SimSpec) -> AcquisitionOperator:
    return AcquisitionOperator(gen_coil_maps(spec), gen_shot_masks(spec))


def simulate_acquisition(magnitude: np.ndarray, spec: SimSpec):
    """Phase-corrupt a magnitude image and acquire it.

    Returns (y, truth, op): noisy undersampled k-space (N, C, H, W), the
    phase-corrupted ground-truth shots (N, H, W), and the acquisition
    operator. noise_sigma is the standard deviation of each of the real and
    imaginary noise parts, added only on retained samples.
    """
    magnitude = np.asarray(magnitude, dtype=np.float64)
    if magnitude.shape != spec.grid:
        raise DimensionError(f"magnitude {magnitude.shape} != grid {spec.grid}")
    if np.any(magnitude < 0) or not np.all(np.isfinite(magnitude)):
        raise ValueError("magnitude must be finite and non-negative")
    phases = np.stack([gen_phase(spec, i) for i in range(spec.n_shots)])
    truth = magnitude[None] * phases
    op = make_operator(spec)
    y = op.forward(truth)
    if spec.noise_sigma > 0:
        rng = stream(spec.seed, "noise")
        shape = y.shape
        noise = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        y = y + spec.noise_sigma * op.shot_masks[:, None] * noise
    return y, truth, op


def sos_combine(shots: np.ndarray) -> np.ndarray:
    """Root-mean-square magnitude combination across shots.

    Normalized by the shot count so that combining N identical-magnitude
    shots returns that magnitude.
    """
    return np.sqrt(np.mean(np.abs(shots) ** 2, axis=-3))
