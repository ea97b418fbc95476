import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from skimage.metrics import structural_similarity

from msrecon import MetricReport, psnr, report, shepp_logan, ssim
from msrecon.errors import DimensionError


def test_psnr_closed_form():
    x = np.ones((10, 10))
    y = x - 0.1  # MSE = 0.01, peak = 1
    assert abs(psnr(x, y) - 20.0) < 1e-12


def test_psnr_sentinel():
    x = shepp_logan((32, 32))
    assert psnr(x, x.copy()) == 300.0


def test_psnr_matches_reimplementation():
    rng = np.random.default_rng(0)
    x = rng.random((24, 24))
    y = rng.random((24, 24))
    reference = 10.0 * np.log10(x.max() ** 2 / np.mean((x - y) ** 2))
    assert abs(psnr(x, y) - reference) < 1e-10


def test_psnr_complex_inputs_use_moduli():
    rng = np.random.default_rng(1)
    mag = rng.random((16, 16)) + 0.1
    phase = np.exp(1j * rng.uniform(-np.pi, np.pi, (16, 16)))
    assert psnr(mag * phase, mag * np.conj(phase)) == 300.0


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 31 - 1), st.floats(0.1, 50.0))
def test_psnr_scale_invariance(seed, scale):
    rng = np.random.default_rng(seed)
    x = rng.random((16, 16)) + 0.05
    y = rng.random((16, 16))
    assert abs(psnr(x, y) - psnr(scale * x, scale * y)) <= 1e-10


def test_ssim_identical_images():
    x = shepp_logan((32, 32))
    assert ssim(x, x.copy()) == pytest.approx(1.0, abs=1e-12)


def test_ssim_flat_images():
    x = np.full((16, 16), 0.7)
    assert ssim(x, x.copy()) == pytest.approx(1.0)


def test_ssim_matches_reference_implementation():
    rng = np.random.default_rng(2)
    x = shepp_logan((64, 64))
    y = np.clip(x + 0.05 * rng.standard_normal((64, 64)), 0, None)
    mine = ssim(x, y)
    reference = structural_similarity(
        x, y, gaussian_weights=True, sigma=1.5, use_sample_covariance=False,
        data_range=x.max())
    assert abs(mine - reference) < 1e-6


def test_ssim_symmetric_when_maxima_agree():
    rng = np.random.default_rng(3)
    x = rng.random((32, 32))
    y = rng.random((32, 32))
    x[0, 0] = y[0, 0] = 1.0  # pin a common dynamic range
    assert abs(ssim(x, y) - ssim(y, x)) <= 1e-10


def test_metrics_decrease_with_noise():
    rng = np.random.default_rng(4)
    x = shepp_logan((64, 64))
    noise = rng.standard_normal((64, 64))
    psnrs, ssims = [], []
    for sigma in (0.001, 0.002, 0.003):
        y = x + sigma * noise
        psnrs.append(psnr(x, y))
        ssims.append(ssim(x, y))
    assert psnrs[0] > psnrs[1] > psnrs[2]
    assert ssims[0] > ssims[1] > ssims[2]


def test_report_perfect_reconstruction():
    rng = np.random.default_rng(5)
    truth = rng.random((4, 16, 16)) + 0.1
    rep = report(truth, truth.copy())
    assert rep.per_shot_psnr == [300.0] * 4
    assert rep.per_shot_ssim == pytest.approx([1.0] * 4)


def test_report_averages_are_means():
    rng = np.random.default_rng(6)
    truth = rng.random((4, 16, 16)) + 0.1
    recon = truth + 0.05 * rng.standard_normal((4, 16, 16))
    rep = report(truth, recon)
    assert rep.mean_psnr == pytest.approx(np.mean(rep.per_shot_psnr), abs=1e-12)
    assert rep.mean_ssim == pytest.approx(np.mean(rep.per_shot_ssim), abs=1e-12)


def test_report_one_corrupted_shot():
    rng = np.random.default_rng(7)
    truth = rng.random((4, 16, 16)) + 0.1
    recon = truth.copy()
    recon[2] += 0.2
    rep = report(truth, recon)
    expected = np.mean(rep.per_shot_psnr)
    assert rep.mean_psnr == pytest.approx(expected, abs=1e-12)
    assert rep.per_shot_psnr.count(300.0) == 3


def test_shot_count_mismatch():
    with pytest.raises(DimensionError):
        report(np.ones((4, 16, 16)), np.ones((3, 16, 16)))


def test_psnr_rejects_zero_reference():
    with pytest.raises(ValueError):
        psnr(np.zeros((8, 8)), np.ones((8, 8)))
