"""Minimal convolutional residual denoiser with exact backprop and Adam.

The denoiser splits complex multishot images into 2N real channels (real
parts then imaginary parts), runs a ladder of same-size zero-padded
convolutions (ReLU on all but the last layer, which is a linear 1x1), and
subtracts the ladder output from its input. A zero-parameter ladder is
therefore exactly the identity map.

Forward/backward work on a single (N, H, W) example or a batched
(B, N, H, W) stack; parameter gradients are summed over the batch.
"""

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DimensionError

ACTIVATIONS = ("relu", "none")
DEFAULT_HIDDEN = (64, 64, 64, 128, 128, 64, 64)


@dataclass
class ConvLayer:
    weights: np.ndarray  # (out_ch, in_ch, kh, kw)
    bias: np.ndarray     # (out_ch,)
    activation: str = "relu"

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weights.ndim != 4:
            raise DimensionError("conv weights must be (out_ch, in_ch, kh, kw)")
        kh, kw = self.weights.shape[2:]
        if kh % 2 == 0 or kw % 2 == 0:
            raise ValueError("kernel sides must be odd")
        if self.bias.shape != (self.weights.shape[0],):
            raise DimensionError("bias length must equal out_ch")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}")

    @property
    def in_channels(self) -> int:
        return self.weights.shape[1]

    @property
    def out_channels(self) -> int:
        return self.weights.shape[0]


@dataclass
class DenoiserParams:
    """Ordered conv ladder; first in_ch and last out_ch are both 2 * n_shots."""

    layers: list = field(default_factory=list)

    def __post_init__(self):
        if not self.layers:
            raise ValueError("denoiser needs at least one layer")
        if self.layers[0].in_channels != self.layers[-1].out_channels:
            raise DimensionError("ladder must map 2N channels back to 2N channels")
        if self.layers[-1].activation != "none":
            raise ValueError("last layer must be linear")
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if prev.out_channels != nxt.in_channels:
                raise DimensionError("channel chain of the ladder is inconsistent")

    @property
    def io_channels(self) -> int:
        return self.layers[0].in_channels

    @property
    def n_shots(self) -> int:
        return self.io_channels // 2

    def parameter_arrays(self) -> list:
        arrays = []
        for layer in self.layers:
            arrays.append(layer.weights)
            arrays.append(layer.bias)
        return arrays


def build_denoiser(n_shots: int, hidden_channels=DEFAULT_HIDDEN, kernel: int = 3,
                   rng: np.random.Generator | None = None) -> DenoiserParams:
    """Xavier-initialized ladder: 3x3 hidden convs + ReLU, linear 1x1 output."""
    if rng is None:
        rng = np.random.default_rng(0)
    chain = [2 * n_shots] + list(hidden_channels) + [2 * n_shots]
    layers = []
    for i in range(len(chain) - 1):
        last = i == len(chain) - 2
        k = 1 if last else kernel
        fan_in = chain[i] * k * k
        fan_out = chain[i + 1] * k * k
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-limit, limit, size=(chain[i + 1], chain[i], k, k))
        layers.append(ConvLayer(w, np.zeros(chain[i + 1]),
                                "none" if last else "relu"))
    return DenoiserParams(layers)


def zero_denoiser(n_shots: int, hidden_channels=DEFAULT_HIDDEN,
                  kernel: int = 3) -> DenoiserParams:
    """All-zero parameters: the denoiser reduces to the identity map."""
    chain = [2 * n_shots] + list(hidden_channels) + [2 * n_shots]
    layers = []
    for i in range(len(chain) - 1):
        last = i == len(chain) - 2
        k = 1 if last else kernel
        layers.append(ConvLayer(np.zeros((chain[i + 1], chain[i], k, k)),
                                np.zeros(chain[i + 1]),
                                "none" if last else "relu"))
    return DenoiserParams(layers)


# ---------------------------------------------------------------------------
# convolution

def _conv_forward(x, layer):
    """x (B, H, W, in_ch), channels last -> (out (B, H, W, out_ch), cache)."""
    b, h, w, cin = x.shape
    co, _, kh, kw = layer.weights.shape
    ph, pw = kh // 2, kw // 2
    if ph or pw:
        xp = np.pad(x, ((0, 0), (ph, ph), (pw, pw), (0, 0)))
    else:
        xp = x
    cols = sliding_window_view(xp, (kh, kw), axis=(1, 2))
    cols = cols.reshape(b * h * w, cin * kh * kw)
    w_mat = layer.weights.reshape(co, -1)
    pre = cols @ w_mat.T + layer.bias
    pre = pre.reshape(b, h, w, co)
    if layer.activation == "relu":
        mask = pre > 0
        return pre * mask, (cols, mask, (b, h, w))
    return pre, (cols, None, (b, h, w))


def _conv_backward(grad, layer, cache):
    """Gradients of the conv layer: (input grad, weight grad, bias grad)."""
    cols, mask, (b, h, w) = cache
    if mask is not None:
        grad = grad * mask
    co, cin, kh, kw = layer.weights.shape
    g = grad.reshape(b * h * w, co)
    dw = (g.T @ cols).reshape(co, cin, kh, kw)
    db = g.sum(axis=0)
    dcols = (g @ layer.weights.reshape(co, -1)).reshape(b, h, w, cin, kh, kw)
    ph, pw = kh // 2, kw // 2
    dxp = np.zeros((b, h + 2 * ph, w + 2 * pw, cin))
    for a in range(kh):
        for c in range(kw):
            dxp[:, a:a + h, c:c + w, :] += dcols[:, :, :, :, a, c]
    return dxp[:, ph:ph + h, pw:pw + w, :], dw, db


def conv2d(x: np.ndarray, layer: ConvLayer) -> np.ndarray:
    """Same-size zero-padded cross-correlation plus bias and activation.

    Accepts (in_ch, H, W) or a batched (B, in_ch, H, W) stack.
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 3
    if single:
        x = x[None]
    if x.ndim != 4 or x.shape[1] != layer.in_channels:
        raise DimensionError(
            f"input {x.shape} incompatible with {layer.in_channels} input channels")
    out, _ = _conv_forward(np.ascontiguousarray(x.transpose(0, 2, 3, 1)), layer)
    out = out.transpose(0, 3, 1, 2)
    return out[0] if single else out


# ---------------------------------------------------------------------------
# residual denoiser

def channels_from_complex(x):
    """(..., N, H, W) complex -> (..., 2N, H, W) real: real parts then imag."""
    return np.concatenate([x.real, x.imag], axis=-3)


def complex_from_channels(ch):
    n = ch.shape[-3] // 2
    return ch[..., :n, :, :] + 1j * ch[..., n:, :, :]


def _ladder_forward(ch, params):
    caches = []
    h = ch
    for layer in params.layers:
        h, cache = _conv_forward(h, layer)
        caches.append(cache)
    return h, caches


def denoiser_forward_cached(x, params):
    """Batched residual denoiser; returns (output, cache for backward).

    Internally the ladder runs channels-last: (B, H, W, 2N) feature maps.
    """
    x = np.asarray(x, dtype=np.complex128)
    single = x.ndim == 3
    if single:
        x = x[None]
    if x.shape[1] != params.n_shots:
        raise DimensionError(
            f"{x.shape[1]} shots incompatible with io_channels {params.io_channels}")
    feats = np.ascontiguousarray(
        channels_from_complex(x).transpose(0, 2, 3, 1))
    noise_ch, caches = _ladder_forward(feats, params)
    noise = complex_from_channels(noise_ch.transpose(0, 3, 1, 2))
    out = x - noise
    return (out[0] if single else out), (caches, single)


def denoiser_forward(x: np.ndarray, params: DenoiserParams) -> np.ndarray:
    """Residual denoiser: input minus the ladder's noise estimate."""
    out, _ = denoiser_forward_cached(x, params)
    return out


def denoiser_backward_cached(cache, params, upstream):
    """Backward pass from a cached forward; param grads sum over the batch.

    Complex cotangents follow the convention g = dL/dRe + i dL/dIm, so the
    identity branch passes the upstream through unchanged and the ladder
    branch subtracts its contribution.
    """
    caches, single = cache
    upstream = np.asarray(upstream, dtype=np.complex128)
    if single:
        upstream = upstream[None]
    g = np.ascontiguousarray(
        channels_from_complex(-upstream).transpose(0, 2, 3, 1))
    grads = [None] * len(params.layers)
    for i in reversed(range(len(params.layers))):
        g, dw, db = _conv_backward(g, params.layers[i], caches[i])
        grads[i] = (dw, db)
    input_grad = upstream + complex_from_channels(g.transpose(0, 3, 1, 2))
    return (input_grad[0] if single else input_grad), grads


def denoiser_backward(x: np.ndarray, params: DenoiserParams, upstream_grad: np.ndarray):
    """Exact gradients of the denoiser output wrt its input and parameters."""
    _, cache = denoiser_forward_cached(x, params)
    return denoiser_backward_cached(cache, params, upstream_grad)


def grads_to_arrays(grads) -> list:
    arrays = []
    for dw, db in grads:
        arrays.append(dw)
        arrays.append(db)
    return arrays


# ---------------------------------------------------------------------------
# Adam

@dataclass
class AdamState:
    m: list
    v: list
    step: int = 0
    step_size: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_init(params: list, step_size=1e-3, beta1=0.9, beta2=0.999,
              eps=1e-8) -> AdamState:
    return AdamState([np.zeros_like(p) for p in params],
                     [np.zeros_like(p) for p in params],
                     0, step_size, beta1, beta2, eps)


def adam_step(params: list, grads: list, state: AdamState):
    """Bias-corrected Adam update, in place; returns (params, state)."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise DimensionError("params, grads, and state must align")
    state.step += 1
    b1c = 1.0 - state.beta1 ** state.step
    b2c = 1.0 - state.beta2 ** state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= state.step_size * (m / b1c) / (np.sqrt(v / b2c) + state.eps)
    return params, state
