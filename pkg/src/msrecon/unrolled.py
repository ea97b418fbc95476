"""Unrolled reconstruction networks with CG data-consistency layers.

One unrolled iteration applies the k-space denoiser (and, in hybrid mode, an
image-space denoiser) to the current iterate and then solves the regularized
data-consistency system (A^H A + (l1 + l2) I) rho = A^H y + l1 eta + l2 zeta
with a fixed number of CG iterations. The two denoisers share their weights
across all iterations, so the trainable parameter count is independent of
the unroll depth.

Training differentiates the exact computational graph: the CG loop is
reversed iteration by iteration using cached search vectors, so gradients
match the forward computation to machine precision rather than relying on an
implicit-function approximation. Complex cotangents use the convention
g = dL/dRe + i dL/dIm throughout.

Everything operates on batched (B, N, H, W) stacks internally; public entry
points also accept a single example.
"""

from dataclasses import dataclass

import numpy as np

from .cnn import (AdamState, DenoiserParams, adam_init, adam_step,
                  build_denoiser, denoiser_backward_cached,
                  denoiser_forward_cached, grads_to_arrays, zero_denoiser)
from .errors import DimensionError, NumericalError
from .forward import AcquisitionOperator
from .fourier import fft2c, ifft2c
from .rng import stream

MODES = ("kspace-only", "hybrid")


@dataclass
class UnrollConfig:
    n_unrolls: int = 3
    cg_iters: int = 5
    lambda1: float = 0.01
    lambda2: float = 0.05
    mode: str = "hybrid"
    hidden_channels: tuple = (64, 64, 64, 128, 128, 64, 64)

    def __post_init__(self):
        self.hidden_channels = tuple(self.hidden_channels)
        if self.n_unrolls < 1 or self.cg_iters < 1:
            raise ValueError("n_unrolls and cg_iters must be >= 1")
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ValueError("lambda1 and lambda2 must be >= 0")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.mode == "hybrid" and (self.lambda1 <= 0 or self.lambda2 <= 0):
            raise ValueError("hybrid mode requires lambda1 > 0 and lambda2 > 0")
        if self.mode == "kspace-only" and self.lambda2 != 0:
            raise ValueError("kspace-only mode requires lambda2 == 0")


@dataclass
class UnrolledParams:
    """Shared denoiser weights: k-space net always, image net in hybrid mode."""

    kspace_net: DenoiserParams
    image_net: DenoiserParams | None = None

    def parameter_arrays(self) -> list:
        arrays = self.kspace_net.parameter_arrays()
        if self.image_net is not None:
            arrays += self.image_net.parameter_arrays()
        return arrays


def init_params(n_shots: int, cfg: UnrollConfig, seed: int) -> UnrolledParams:
    knet = build_denoiser(n_shots, cfg.hidden_channels,
                          rng=stream(seed, "init/kspace-net"))
    inet = None
    if cfg.mode == "hybrid":
        inet = build_denoiser(n_shots, cfg.hidden_channels,
                              rng=stream(seed, "init/image-net"))
    return UnrolledParams(knet, inet)


def zero_params(n_shots: int, cfg: UnrollConfig) -> UnrolledParams:
    knet = zero_denoiser(n_shots, cfg.hidden_channels)
    inet = zero_denoiser(n_shots, cfg.hidden_channels) if cfg.mode == "hybrid" else None
    return UnrolledParams(knet, inet)


def parameter_count(params: UnrolledParams) -> int:
    return sum(a.size for a in params.parameter_arrays())


# ---------------------------------------------------------------------------
# k-space denoiser wrapper

def kspace_denoise(rho: np.ndarray, net: DenoiserParams) -> np.ndarray:
    """Transform to k-space, denoise all 2N channels jointly, transform back."""
    out, _ = _kspace_denoise_cached(rho, net)
    return out


def _kspace_denoise_cached(rho, net):
    denoised, cache = denoiser_forward_cached(fft2c(rho), net)
    return ifft2c(denoised), cache


def _kspace_denoise_backward(cache, net, upstream):
    # adjoints of the unitary transforms bracket the denoiser backward
    inner_bar, grads = denoiser_backward_cached(cache, net, fft2c(upstream))
    return ifft2c(inner_bar), grads


# ---------------------------------------------------------------------------
# batched CG through the normal operator

def _bdot(a, b):
    """Per-example Re<a, b> over all but the batch axis, shape (B, 1, 1, 1)."""
    return np.real(np.conj(a) * b).sum(axis=(1, 2, 3), keepdims=True)


def _safe_div(num, den):
    return np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)


@dataclass
class _CgCache:
    x0: np.ndarray
    r_list: list      # r_0 .. r_k
    p_list: list      # p_0 .. p_{k-1}
    ap_list: list     # M p_0 .. M p_{k-1}
    d_list: list      # per-example p^H M p
    alpha_list: list
    beta_list: list
    rs_list: list     # rs_0 .. rs_k


def _cg_solve(operator, rhs, x0, iters):
    """Fixed-iteration batched CG; per-example scalars keep results
    independent of batch composition. Converged examples (zero residual)
    pass through unchanged."""
    x = np.array(x0, dtype=np.complex128)
    r = rhs - operator(x)
    p = r.copy()
    rs = _bdot(r, r)
    cache = _CgCache(x0=np.array(x0), r_list=[r.copy()], p_list=[], ap_list=[],
                     d_list=[], alpha_list=[], beta_list=[], rs_list=[rs])
    for _ in range(iters):
        ap = operator(p)
        d = _bdot(p, ap)
        alpha = _safe_div(rs, d)
        x = x + alpha * p
        r = r - alpha * ap
        rs_new = _bdot(r, r)
        beta = _safe_div(rs_new, rs)
        cache.p_list.append(p)
        cache.ap_list.append(ap)
        cache.d_list.append(d)
        cache.alpha_list.append(alpha)
        cache.beta_list.append(beta)
        cache.r_list.append(r.copy())
        cache.rs_list.append(rs_new)
        p = r + beta * p
        rs = rs_new
    if not np.all(np.isfinite(x)):
        raise NumericalError("CG data-consistency layer produced non-finite values")
    return x, cache


def _cg_backward(operator, cache, x_bar):
    """Reverse the CG recurrences; returns cotangents of (rhs, x0)."""
    k = len(cache.p_list)
    x_bar = np.array(x_bar, dtype=np.complex128)
    p_bar = np.zeros_like(x_bar)
    r_bar = np.zeros_like(x_bar)
    rs_bar = np.zeros((x_bar.shape[0], 1, 1, 1))
    for i in reversed(range(k)):
        p, ap = cache.p_list[i], cache.ap_list[i]
        d, alpha, beta = cache.d_list[i], cache.alpha_list[i], cache.beta_list[i]
        rs_i, rs_next = cache.rs_list[i], cache.rs_list[i + 1]
        r_next = cache.r_list[i + 1]
        # p_{i+1} = r_{i+1} + beta p_i
        r_bar = r_bar + p_bar
        beta_bar = _bdot(p_bar, p)
        p_bar = beta * p_bar
        # beta = rs_{i+1} / rs_i
        rs_bar = rs_bar + _safe_div(beta_bar, rs_i)
        rs_prev_bar = -_safe_div(beta_bar * beta, rs_i)
        # rs_{i+1} = Re<r_{i+1}, r_{i+1}>
        r_bar = r_bar + 2.0 * rs_bar * r_next
        # r_{i+1} = r_i - alpha ap
        alpha_bar = -_bdot(r_bar, ap)
        ap_bar = -alpha * r_bar
        # x_{i+1} = x_i + alpha p_i
        alpha_bar = alpha_bar + _bdot(x_bar, p)
        p_bar = p_bar + alpha * x_bar
        # alpha = rs_i / d
        rs_prev_bar = rs_prev_bar + _safe_div(alpha_bar, d)
        d_bar = -_safe_div(alpha_bar * alpha, d)
        # d = Re<p, ap>
        p_bar = p_bar + d_bar * ap
        ap_bar = ap_bar + d_bar * p
        # ap = M p (Hermitian)
        p_bar = p_bar + operator(ap_bar)
        rs_bar = rs_prev_bar
    # rs_0 = Re<r_0, r_0>; p_0 = r_0; r_0 = rhs - M x_0
    r_bar = r_bar + 2.0 * rs_bar * cache.r_list[0] + p_bar
    rhs_bar = r_bar
    x0_bar = x_bar - operator(r_bar)
    return rhs_bar, x0_bar


# ---------------------------------------------------------------------------
# data-consistency layer

def data_consistency(op: AcquisitionOperator, ahy: np.ndarray, eta: np.ndarray,
                     zeta: np.ndarray | None, lambda1: float, lambda2: float,
                     cg_iters: int) -> np.ndarray:
    """Solve (A^H A + (l1 + l2) I) rho = ahy + l1 eta + l2 zeta by CG,
    warm-started from eta."""
    out, _ = _dc_cached(op, ahy, eta, zeta, lambda1, lambda2, cg_iters)
    return out


def _as_batch(x):
    x = np.asarray(x, dtype=np.complex128)
    if x.ndim == 3:
        return x[None], True
    return x, False


def _shifted_normal(op, shift):
    """Normal operator in fftshifted coordinates.

    Conjugating A^H A by the (real, orthogonal) fftshift permutation lets the
    CG loop skip the four shift copies per transform; results are
    bit-identical to the centered form because permutations commute with the
    elementwise factors and cancel pairwise.
    """
    maps = np.fft.ifftshift(op.coil_maps, axes=(-2, -1))
    maps_conj = np.conj(maps)
    masks = np.fft.ifftshift(op.shot_masks, axes=(-2, -1))[:, None]

    def operator(v):
        coil_imgs = maps * v[..., :, None, :, :]
        k = masks * np.fft.fft2(coil_imgs, norm="ortho")
        back = (maps_conj * np.fft.ifft2(k, norm="ortho")).sum(axis=-3)
        return back + shift * v

    return operator


def _dc_cached(op, ahy, eta, zeta, lambda1, lambda2, cg_iters):
    ahy_b, single = _as_batch(ahy)
    eta_b, _ = _as_batch(eta)
    rhs = ahy_b + lambda1 * eta_b
    if lambda2 != 0:
        if zeta is None:
            raise DimensionError("lambda2 != 0 requires a zeta prior")
        zeta_b, _ = _as_batch(zeta)
        rhs = rhs + lambda2 * zeta_b
    shift = lambda1 + lambda2
    operator = _shifted_normal(op, shift)
    rhs_s = np.fft.ifftshift(rhs, axes=(-2, -1))
    x0_s = np.fft.ifftshift(eta_b, axes=(-2, -1))
    x_s, cache = _cg_solve(operator, rhs_s, x0_s, cg_iters)
    x = np.fft.fftshift(x_s, axes=(-2, -1))
    return (x[0] if single else x), (cache, operator, single)


# ---------------------------------------------------------------------------
# unrolled forward / backward

@dataclass
class UnrollCache:
    single: bool
    iterations: list  # per unroll: dict of stage caches


def unrolled_forward(y: np.ndarray, op: AcquisitionOperator,
                     params: UnrolledParams, cfg: UnrollConfig,
                     want_cache: bool = False):
    """Run the unrolled network from measurements y; rho_0 = A^H y."""
    y = np.asarray(y, dtype=np.complex128)
    single = y.ndim == 4
    if single:
        y = y[None]
    hybrid = cfg.mode == "hybrid"
    if hybrid and params.image_net is None:
        raise DimensionError("hybrid mode requires an image-space net")
    ahy = op.adjoint(y)
    rho = ahy
    iterations = []
    for _ in range(cfg.n_unrolls):
        eta, dk_cache = _kspace_denoise_cached(rho, params.kspace_net)
        zeta, di_cache = (None, None)
        if hybrid:
            zeta, di_cache = denoiser_forward_cached(rho, params.image_net)
        rho, (cg_cache, operator, _) = _dc_cached(
            op, ahy, eta, zeta, cfg.lambda1, cfg.lambda2, cfg.cg_iters)
        iterations.append({"dk": dk_cache, "di": di_cache,
                           "cg": cg_cache, "operator": operator})
    out = rho[0] if single else rho
    if want_cache:
        return out, UnrollCache(single, iterations)
    return out


def _zero_grads(net):
    return [(np.zeros_like(l.weights), np.zeros_like(l.bias)) for l in net.layers]


def _accumulate(total, grads):
    for (tw, tb), (dw, db) in zip(total, grads):
        tw += dw
        tb += db


@dataclass
class UnrolledGrads:
    kspace: list
    image: list | None

    def parameter_arrays(self) -> list:
        arrays = grads_to_arrays(self.kspace)
        if self.image is not None:
            arrays += grads_to_arrays(self.image)
        return arrays


def unrolled_backward(cache: UnrollCache, params: UnrolledParams,
                      cfg: UnrollConfig, loss_grad: np.ndarray) -> UnrolledGrads:
    """Exact reverse-mode gradients through every unroll and CG layer.

    Shared-parameter gradients accumulate across the unrolled iterations.
    rho_0 = A^H y carries no trainable parameters, so the remaining input
    cotangent is dropped at the end.
    """
    hybrid = cfg.mode == "hybrid"
    loss_grad = np.asarray(loss_grad, dtype=np.complex128)
    rho_bar = loss_grad[None] if cache.single else loss_grad.copy()
    dk_total = _zero_grads(params.kspace_net)
    di_total = _zero_grads(params.image_net) if hybrid else None
    for it in reversed(cache.iterations):
        # the CG cache lives in fftshifted coordinates; the shift permutation
        # is orthogonal, so cotangents map through it and its inverse
        out_bar_s = np.fft.ifftshift(rho_bar, axes=(-2, -1))
        rhs_bar_s, x0_bar_s = _cg_backward(it["operator"], it["cg"], out_bar_s)
        rhs_bar = np.fft.fftshift(rhs_bar_s, axes=(-2, -1))
        x0_bar = np.fft.fftshift(x0_bar_s, axes=(-2, -1))
        eta_bar = cfg.lambda1 * rhs_bar + x0_bar
        rho_bar = np.zeros_like(rhs_bar)
        if hybrid:
            zeta_bar = cfg.lambda2 * rhs_bar
            di_in_bar, di_grads = denoiser_backward_cached(
                it["di"], params.image_net, zeta_bar)
            _accumulate(di_total, di_grads)
            rho_bar += di_in_bar
        dk_in_bar, dk_grads = _kspace_denoise_backward(
            it["dk"], params.kspace_net, eta_bar)
        _accumulate(dk_total, dk_grads)
        rho_bar += dk_in_bar
    return UnrolledGrads(dk_total, di_total)


# ---------------------------------------------------------------------------
# training

def mse_loss(out: np.ndarray, truth: np.ndarray):
    """Mean squared error over all complex entries and its cotangent."""
    diff = out - truth
    loss = float(np.mean(np.abs(diff) ** 2))
    grad = 2.0 * diff / diff.size
    return loss, grad


@dataclass
class TrainConfig:
    epochs: int = 30
    batch_size: int = 4
    step_size: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    val_fraction: float = 0.1

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch_size >= 1")
        if not 0 <= self.val_fraction < 1:
            raise ValueError("val_fraction must be in [0, 1)")


def _dataset_loss(y, truth, op, params, cfg, batch_size):
    total = 0.0
    for lo in range(0, y.shape[0], batch_size):
        out = unrolled_forward(y[lo:lo + batch_size], op, params, cfg)
        diff = out - truth[lo:lo + batch_size]
        total += float(np.sum(np.abs(diff) ** 2)) / np.prod(diff.shape[1:])
    return total / y.shape[0]


def train_unrolled(y_train: np.ndarray, truth_train: np.ndarray,
                   y_val: np.ndarray, truth_val: np.ndarray,
                   op: AcquisitionOperator, params: UnrolledParams,
                   cfg: UnrollConfig, tcfg: TrainConfig, seed: int):
    """Adam over the MSE between network output and ground-truth shots.

    Returns (params, history) where history rows are
    (epoch, train_loss, val_loss); row 0 evaluates the initial parameters.
    Raises NumericalError on a non-finite loss or gradient, leaving params at
    their last finite values.
    """
    arrays = params.parameter_arrays()
    state = adam_init(arrays, tcfg.step_size, tcfg.beta1, tcfg.beta2, tcfg.adam_eps)
    history = [(0,
                _dataset_loss(y_train, truth_train, op, params, cfg, tcfg.batch_size),
                _dataset_loss(y_val, truth_val, op, params, cfg, tcfg.batch_size))]
    n = y_train.shape[0]
    for epoch in range(1, tcfg.epochs + 1):
        order = stream(seed, f"train/epoch-{epoch}").permutation(n)
        batch_losses = []
        for lo in range(0, n, tcfg.batch_size):
            idx = order[lo:lo + tcfg.batch_size]
            out, cache = unrolled_forward(y_train[idx], op, params, cfg,
                                          want_cache=True)
            loss, lg = mse_loss(out, truth_train[idx])
            if not np.isfinite(loss):
                raise NumericalError(
                    f"training loss became non-finite at epoch {epoch}")
            grads = unrolled_backward(cache, params, cfg, lg)
            grad_arrays = grads.parameter_arrays()
            if not all(np.all(np.isfinite(g)) for g in grad_arrays):
                raise NumericalError(
                    f"gradients became non-finite at epoch {epoch}")
            adam_step(arrays, grad_arrays, state)
            batch_losses.append(loss)
        val = _dataset_loss(y_val, truth_val, op, params, cfg, tcfg.batch_size)
        history.append((epoch, float(np.mean(batch_losses)), val))
    return params, history
