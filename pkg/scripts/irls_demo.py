"""Reconstruct one simulated multishot phantom and print quality numbers.

Runs the structured low-rank solver on a 64x64 four-shot, four-coil
acquisition with bandlimited phase errors and compares it against the
zero-filled adjoint baseline.
"""

import argparse

import numpy as np

from msrecon import (FilterSupport, SimSpec, SolverConfig, irls_reconstruct,
                     report, shepp_logan, simulate_acquisition)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--size", type=int, default=64)
    parser.add_argument("--shots", type=int, default=4)
    parser.add_argument("--coils", type=int, default=4)
    parser.add_argument("--sigma", type=float, default=0.0)
    args = parser.parse_args()

    grid = (args.size, args.size)
    spec = SimSpec(grid, args.shots, args.coils, (3, 3), args.sigma, args.seed)
    magnitude = shepp_logan(grid)
    y, truth, op = simulate_acquisition(magnitude, spec)

    zero_filled = report(truth, op.adjoint(y))
    rho, trace = irls_reconstruct(y, op, FilterSupport(3, 3), SolverConfig())
    solved = report(truth, rho)

    print(f"zero-filled : {zero_filled.mean_psnr:6.2f} dB  "
          f"SSIM {zero_filled.mean_ssim:.4f}")
    print(f"irls        : {solved.mean_psnr:6.2f} dB  "
          f"SSIM {solved.mean_ssim:.4f}")
    print(f"gain        : {solved.mean_psnr - zero_filled.mean_psnr:6.2f} dB")
    print("objective   :", "  ".join(f"{o:.4g}" for o in trace.objectives))
    drops = np.diff(trace.objectives)
    print("monotone    :", bool(np.all(drops <= 1e-6 * np.abs(trace.objectives[:-1]))))


if __name__ == "__main__":
    main()
