"""Multishot diffusion MRI reconstruction.

Structured low-rank recovery of phase-corrupted multishot data (block-Hankel
annihilation filterbanks solved by iteratively reweighted least squares) and
unrolled networks that replace the self-learned filterbank with trained
convolutional denoisers around conjugate-gradient data-consistency layers,
plus a simulation harness and image-quality metrics.
"""

from .cnn import (AdamState, ConvLayer, DenoiserParams, adam_init, adam_step,
                  build_denoiser, conv2d, denoiser_backward, denoiser_forward,
                  zero_denoiser)
from .forward import AcquisitionOperator
from .fourier import fft2c, ifft2c
from .hankel import (FilterBank, FilterSupport, HankelLift, apply_filterbank,
                     filterbank_adjoint, gram, lift, lift_adjoint,
                     residual_project)
from .metrics import MetricReport, psnr, report, ssim
from .simulate import (SimSpec, gen_coil_maps, gen_phase, gen_shot_masks,
                       make_operator, random_phantom, shepp_logan,
                       simulate_acquisition, sos_combine)
from .solvers import (CostTrace, SolverConfig, conjugate_gradient,
                      irls_reconstruct, irls_weights, nuclear_norm)
from .unrolled import (TrainConfig, UnrollConfig, UnrolledParams,
                       data_consistency, init_params, kspace_denoise,
                       mse_loss, parameter_count, train_unrolled,
                       unrolled_backward, unrolled_forward, zero_params)

__version__ = "0.1.0"
