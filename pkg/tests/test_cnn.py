import numpy as np
import pytest

from msrecon import (adam_init, adam_step, build_denoiser, conv2d,
                     denoiser_backward, denoiser_forward, zero_denoiser)
from msrecon.cnn import ConvLayer, DenoiserParams, grads_to_arrays
from msrecon.errors import DimensionError


def random_complex(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


# ---------------------------------------------------------------------------
# conv2d

def test_identity_kernel():
    w = np.zeros((1, 1, 3, 3))
    w[0, 0, 1, 1] = 1.0
    layer = ConvLayer(w, np.zeros(1), "none")
    x = np.random.default_rng(0).standard_normal((1, 5, 7))
    assert np.abs(conv2d(x, layer) - x).max() < 1e-15


def test_one_by_one_scaling():
    layer = ConvLayer(np.full((1, 1, 1, 1), 2.0), np.zeros(1), "none")
    x = np.random.default_rng(1).standard_normal((1, 4, 4))
    assert np.abs(conv2d(x, layer) - 2 * x).max() < 1e-15


def conv_reference(x, layer):
    """Direct sliding-window zero-padded cross-correlation."""
    co, ci, kh, kw = layer.weights.shape
    _, h, w = x.shape
    ph, pw = kh // 2, kw // 2
    xp = np.pad(x, ((0, 0), (ph, ph), (pw, pw)))
    out = np.zeros((co, h, w))
    for o in range(co):
        for i in range(h):
            for j in range(w):
                acc = layer.bias[o]
                for c in range(ci):
                    for a in range(kh):
                        for b in range(kw):
                            acc += layer.weights[o, c, a, b] * xp[c, i + a, j + b]
                out[o, i, j] = acc
    if layer.activation == "relu":
        out = np.maximum(out, 0.0)
    return out


def test_conv_matches_nested_loop_oracle():
    rng = np.random.default_rng(2)
    x = rng.standard_normal((1, 4, 6))
    layer = ConvLayer(rng.standard_normal((3, 1, 3, 3)),
                      rng.standard_normal(3), "relu")
    assert np.abs(conv2d(x, layer) - conv_reference(x, layer)).max() < 1e-12


def test_conv_channel_mismatch():
    layer = ConvLayer(np.zeros((2, 3, 3, 3)), np.zeros(2), "none")
    with pytest.raises(DimensionError):
        conv2d(np.zeros((2, 4, 4)), layer)


# ---------------------------------------------------------------------------
# denoiser forward

def test_zero_parameters_identity():
    params = zero_denoiser(2, hidden_channels=(5, 5))
    x = random_complex(np.random.default_rng(3), (2, 6, 6))
    assert np.array_equal(denoiser_forward(x, params), x)


def test_zero_input_zero_output():
    params = build_denoiser(2, hidden_channels=(4,), rng=np.random.default_rng(4))
    x = np.zeros((2, 6, 6), dtype=complex)
    assert np.all(denoiser_forward(x, params) == 0)


def ladder_reference(x, params):
    """Independent ladder evaluation: channels through conv_reference."""
    feats = np.concatenate([x.real, x.imag], axis=0)
    for layer in params.layers:
        feats = conv_reference(feats, layer)
    n = x.shape[0]
    return feats[:n] + 1j * feats[n:]


def test_residual_structure_matches_reimplementation():
    rng = np.random.default_rng(5)
    params = build_denoiser(1, hidden_channels=(3,), rng=rng)
    x = random_complex(rng, (1, 5, 5))
    expected = x - ladder_reference(x, params)
    assert np.abs(denoiser_forward(x, params) - expected).max() < 1e-12


# ---------------------------------------------------------------------------
# denoiser backward

def test_zero_upstream_zero_gradients():
    rng = np.random.default_rng(6)
    params = build_denoiser(1, hidden_channels=(3,), rng=rng)
    x = random_complex(rng, (1, 6, 6))
    input_grad, grads = denoiser_backward(x, params, np.zeros_like(x))
    assert np.all(input_grad == 0)
    assert all(np.all(dw == 0) and np.all(db == 0) for dw, db in grads)


def test_identity_network_passes_upstream():
    params = zero_denoiser(1, hidden_channels=(3,))
    rng = np.random.default_rng(7)
    x = random_complex(rng, (1, 6, 6))
    upstream = random_complex(rng, (1, 6, 6))
    input_grad, _ = denoiser_backward(x, params, upstream)
    assert np.abs(input_grad - upstream).max() < 1e-14


def real_loss(x, params, probe):
    out = denoiser_forward(x, params)
    return float(np.real(np.vdot(probe, out)))


def test_gradients_match_finite_differences():
    rng = np.random.default_rng(8)
    params = build_denoiser(1, hidden_channels=(4,), rng=rng)  # 2 layers
    x = random_complex(rng, (1, 6, 6))
    probe = random_complex(rng, (1, 6, 6))
    # dL/dout for L = Re<probe, out> is probe under the chosen convention
    input_grad, grads = denoiser_backward(x, params, probe)
    arrays = params.parameter_arrays()
    grad_arrays = grads_to_arrays(grads)
    h = 1e-6
    check = np.random.default_rng(9)
    for p, g in zip(arrays, grad_arrays):
        flat_p, flat_g = p.ravel(), g.ravel()
        for idx in check.choice(flat_p.size, size=min(10, flat_p.size),
                                replace=False):
            orig = flat_p[idx]
            flat_p[idx] = orig + h
            up = real_loss(x, params, probe)
            flat_p[idx] = orig - h
            down = real_loss(x, params, probe)
            flat_p[idx] = orig
            fd = (up - down) / (2 * h)
            assert abs(fd - flat_g[idx]) <= 1e-5 * max(abs(fd), abs(flat_g[idx]), 1e-8)
    # input gradient, real and imaginary parts separately
    flat = x.ravel()
    for idx in check.choice(flat.size, size=8, replace=False):
        orig = flat[idx]
        flat[idx] = orig + h
        up = real_loss(x, params, probe)
        flat[idx] = orig - h
        down = real_loss(x, params, probe)
        flat[idx] = orig + 1j * h
        up_i = real_loss(x, params, probe)
        flat[idx] = orig - 1j * h
        down_i = real_loss(x, params, probe)
        flat[idx] = orig
        fd = (up - down) / (2 * h) + 1j * (up_i - down_i) / (2 * h)
        ig = input_grad.ravel()[idx]
        assert abs(fd - ig) <= 1e-5 * max(abs(fd), abs(ig), 1e-8)


# ---------------------------------------------------------------------------
# Adam

def test_adam_zero_gradient_keeps_params():
    params = [np.array([1.0, -2.0]), np.array([[0.5]])]
    state = adam_init(params)
    before = [p.copy() for p in params]
    adam_step(params, [np.zeros_like(p) for p in params], state)
    assert state.step == 1
    assert all(np.array_equal(a, b) for a, b in zip(params, before))


def test_adam_first_step_magnitude():
    # bias correction makes mhat/sqrt(vhat) exactly 1 on the first step;
    # eps is made negligible so the identity is what gets tested
    params = [np.array(0.0)]
    state = adam_init(params, step_size=1e-3, eps=1e-15)
    adam_step(params, [np.array(1.0)], state)
    assert abs(abs(params[0]) - 1e-3) < 1e-12


def test_adam_matches_scalar_recurrence():
    lr, b1, b2, eps = 0.1, 0.9, 0.999, 1e-8
    theta = 1.7
    params = [np.array(theta)]
    state = adam_init(params, lr, b1, b2, eps)
    m = v = 0.0
    ref = theta
    for t in range(1, 11):
        g = 2.0 * ref          # gradient of ref^2
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        ref -= lr * (m / (1 - b1 ** t)) / (np.sqrt(v / (1 - b2 ** t)) + eps)
        adam_step(params, [np.array(2.0 * float(params[0]))], state)
        assert abs(float(params[0]) - ref) < 1e-10


def test_seeded_initialization_and_updates_bit_identical():
    def run():
        rng = np.random.default_rng(123)
        params = build_denoiser(1, hidden_channels=(4,), rng=rng)
        arrays = params.parameter_arrays()
        state = adam_init(arrays)
        grng = np.random.default_rng(5)
        for _ in range(3):
            grads = [grng.standard_normal(a.shape) for a in arrays]
            adam_step(arrays, grads, state)
        return arrays

    first, second = run(), run()
    assert all(np.array_equal(a, b) for a, b in zip(first, second))


def test_ladder_validation():
    with pytest.raises(ValueError):
        DenoiserParams([ConvLayer(np.zeros((2, 2, 1, 1)), np.zeros(2), "relu")])
    with pytest.raises(DimensionError):
        DenoiserParams([
            ConvLayer(np.zeros((3, 2, 3, 3)), np.zeros(3), "relu"),
            ConvLayer(np.zeros((2, 4, 1, 1)), np.zeros(2), "none"),
        ])
