"""Desk-scale end-to-end study: train both unrolled networks and tabulate
mean PSNR/SSIM against the classical solver and the zero-filled baseline
across noise levels.

With the defaults this takes on the order of ten minutes on one CPU core;
shrink --train-examples/--epochs for a quicker pass.
"""

import argparse
import time

import numpy as np

from msrecon import (FilterSupport, SimSpec, SolverConfig, TrainConfig,
                     UnrollConfig, init_params, irls_reconstruct,
                     random_phantom, report, simulate_acquisition,
                     train_unrolled, unrolled_forward)
from msrecon.rng import child_seed, stream


def make_set(n, seed, sigma, grid, shots, coils):
    ys, truths, op = [], [], None
    for i in range(n):
        ex_seed = child_seed(seed, f"example/{i}")
        spec = SimSpec(grid, shots, coils, (3, 3), sigma, ex_seed)
        magnitude = random_phantom(grid, stream(ex_seed, "phantom"))
        y, truth, op = simulate_acquisition(magnitude, spec)
        ys.append(y)
        truths.append(truth)
    return np.stack(ys), np.stack(truths), op


def mean_scores(truths, recons):
    reps = [report(t, r) for t, r in zip(truths, recons)]
    return (float(np.mean([r.mean_psnr for r in reps])),
            float(np.mean([r.mean_ssim for r in reps])))


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--train-examples", type=int, default=200)
    parser.add_argument("--test-examples", type=int, default=60)
    parser.add_argument("--size", type=int, default=48)
    parser.add_argument("--epochs", type=int, default=30)
    parser.add_argument("--hidden", type=int, nargs="+", default=[8] * 6)
    parser.add_argument("--seed", type=int, default=100)
    args = parser.parse_args()

    grid = (args.size, args.size)
    shots = coils = 4
    sigmas = (0.001, 0.002, 0.003)
    print("simulating ...", flush=True)
    y_tr, t_tr, op = make_set(args.train_examples, args.seed, sigmas[0],
                              grid, shots, coils)
    tests = {s: make_set(args.test_examples, args.seed + 100, s,
                         grid, shots, coils) for s in sigmas}

    n_val = max(1, args.train_examples // 10)
    tcfg = TrainConfig(epochs=args.epochs, batch_size=4)
    models = {}
    for mode in ("hybrid", "kspace-only"):
        cfg = UnrollConfig(n_unrolls=3, cg_iters=5, lambda1=0.01,
                           lambda2=0.05 if mode == "hybrid" else 0.0,
                           mode=mode, hidden_channels=tuple(args.hidden))
        params = init_params(shots, cfg, seed=args.seed)
        start = time.time()
        params, hist = train_unrolled(y_tr[:-n_val], t_tr[:-n_val],
                                      y_tr[-n_val:], t_tr[-n_val:],
                                      op, params, cfg, tcfg, seed=args.seed)
        print(f"trained {mode:12s} in {time.time() - start:6.0f}s   "
              f"loss {hist[0][1]:.5f} -> {hist[-1][1]:.5f}", flush=True)
        models[mode] = (params, cfg)

    support = FilterSupport(3, 3)
    solver_cfg = SolverConfig()
    header = f"{'sigma':>7} | {'zero-filled':>17} | {'irls':>17} | " \
             f"{'modl-kspace':>17} | {'modl-hybrid':>17}"
    print(header)
    print("-" * len(header))
    for sigma, (y_te, t_te, op_te) in tests.items():
        cells = []
        cells.append(mean_scores(t_te, op_te.adjoint(y_te)))
        recs = [irls_reconstruct(y, op_te, support, solver_cfg)[0] for y in y_te]
        cells.append(mean_scores(t_te, np.stack(recs)))
        for mode in ("kspace-only", "hybrid"):
            params, cfg = models[mode]
            cells.append(mean_scores(t_te, unrolled_forward(y_te, op_te,
                                                            params, cfg)))
        row = " | ".join(f"{p:7.2f}dB {s:.4f}" for p, s in cells)
        print(f"{sigma:7.3f} | {row}", flush=True)


if __name__ == "__main__":
    main()
