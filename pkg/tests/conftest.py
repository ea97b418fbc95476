"""Session fixtures for the acceptance suite.

The toy study (dataset simulation plus end-to-end training of both unrolled
network variants) is shared between the training and noise-monotonicity
acceptance criteria, so it is built once per session.
"""

import time

import numpy as np
import pytest

from msrecon import (FilterSupport, SimSpec, SolverConfig, TrainConfig,
                     UnrollConfig, init_params, irls_reconstruct,
                     random_phantom, report, simulate_acquisition,
                     train_unrolled, unrolled_forward)
from msrecon.rng import child_seed, stream

TOY_GRID = (48, 48)
TOY_SHOTS = 4
TOY_COILS = 2
TOY_HIDDEN = (8, 8, 8, 8, 8, 8)
TOY_SIGMAS = (0.001, 0.002, 0.003)
TOY_TRAIN_EXAMPLES = 200
TOY_TEST_EXAMPLES = 60


def make_toy_set(n_examples, seed, sigma):
    """Simulated multishot examples with one shared acquisition operator."""
    ys, truths, op = [], [], None
    for i in range(n_examples):
        ex_seed = child_seed(seed, f"example/{i}")
        spec = SimSpec(TOY_GRID, TOY_SHOTS, TOY_COILS, (3, 3), sigma, ex_seed)
        magnitude = random_phantom(TOY_GRID, stream(ex_seed, "phantom"))
        y, truth, op = simulate_acquisition(magnitude, spec)
        ys.append(y)
        truths.append(truth)
    return np.stack(ys), np.stack(truths), op


def mean_scores(truths, recons):
    reps = [report(t, r) for t, r in zip(truths, recons)]
    return (float(np.mean([r.mean_psnr for r in reps])),
            float(np.mean([r.mean_ssim for r in reps])))


@pytest.fixture(scope="session")
def toy_study():
    y_train, truth_train, op = make_toy_set(TOY_TRAIN_EXAMPLES, 100,
                                            TOY_SIGMAS[0])
    test_sets = {sigma: make_toy_set(TOY_TEST_EXAMPLES, 200, sigma)
                 for sigma in TOY_SIGMAS}

    n_val = TOY_TRAIN_EXAMPLES // 10
    tcfg = TrainConfig(epochs=30, batch_size=4, step_size=1e-3)
    histories, models, train_seconds = {}, {}, {}
    for mode in ("hybrid", "kspace-only"):
        cfg = UnrollConfig(n_unrolls=3, cg_iters=5, lambda1=0.01,
                           lambda2=0.05 if mode == "hybrid" else 0.0,
                           mode=mode, hidden_channels=TOY_HIDDEN)
        params = init_params(TOY_SHOTS, cfg, seed=0)
        start = time.time()
        params, history = train_unrolled(
            y_train[:-n_val], truth_train[:-n_val],
            y_train[-n_val:], truth_train[-n_val:],
            op, params, cfg, tcfg, seed=0)
        train_seconds[mode] = time.time() - start
        histories[mode] = history
        models[mode] = (params, cfg)

    support = FilterSupport(3, 3)
    solver_cfg = SolverConfig()
    scores = {}
    for sigma, (y_test, truth_test, op_test) in test_sets.items():
        row = {}
        row["zero-filled"] = mean_scores(truth_test, op_test.adjoint(y_test))
        irls = np.stack([irls_reconstruct(y, op_test, support, solver_cfg)[0]
                         for y in y_test])
        row["irls"] = mean_scores(truth_test, irls)
        for mode, method in (("kspace-only", "modl-kspace"),
                             ("hybrid", "modl-hybrid")):
            params, cfg = models[mode]
            out = unrolled_forward(y_test, op_test, params, cfg)
            row[method] = mean_scores(truth_test, out)
        scores[sigma] = row

    return {"histories": histories, "scores": scores,
            "train_seconds": train_seconds}
