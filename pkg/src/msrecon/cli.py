"""Command-line surface: simulate, reconstruct, train, evaluate.

Datasets are directories with one subdirectory per example (truth shots,
k-space data, coil maps, masks as header+payload array files) plus a
manifest listing the examples and the echoed configuration. Checkpoints are
directories with a versioned JSON header and one array file per parameter.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure.
"""

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import config as cfgmod
from .arrayio import load_array, save_array
from .cnn import ConvLayer, DenoiserParams
from .errors import ConfigError, DataError, NumericalError
from .forward import AcquisitionOperator
from .metrics import report
from .rng import child_seed, stream
from .simulate import random_phantom, simulate_acquisition, sos_combine
from .solvers import irls_reconstruct
from .unrolled import (UnrolledParams, train_unrolled, unrolled_forward)

CHECKPOINT_VERSION = 1


# ---------------------------------------------------------------------------
# dataset persistence

def write_dataset(resolved: dict, out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    examples = []
    for idx in range(resolved["n_examples"]):
        ex_seed = child_seed(resolved["seed"], f"example/{idx}")
        spec = cfgmod.sim_spec(resolved, seed=ex_seed)
        magnitude = random_phantom(spec.grid, stream(ex_seed, "phantom"))
        y, truth, op = simulate_acquisition(magnitude, spec)
        ex_dir = os.path.join(out_dir, "examples", f"{idx:04d}")
        os.makedirs(ex_dir, exist_ok=True)
        save_array(os.path.join(ex_dir, "truth.json"), truth)
        save_array(os.path.join(ex_dir, "y.json"), y)
        save_array(os.path.join(ex_dir, "coils.json"), op.coil_maps)
        save_array(os.path.join(ex_dir, "masks.json"), op.shot_masks)
        examples.append({
            "index": idx,
            "dir": f"examples/{idx:04d}",
            "truth_shape": list(truth.shape),
            "y_shape": list(y.shape),
        })
    manifest = {"config": resolved, "examples": examples}
    with open(os.path.join(out_dir, "manifest.json"), "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")


def load_manifest(dataset_dir: str) -> dict:
    path = os.path.join(dataset_dir, "manifest.json")
    try:
        with open(path) as f:
            return json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read dataset manifest {path}: {exc}") from exc


def load_example(dataset_dir: str, entry: dict):
    ex_dir = os.path.join(dataset_dir, entry["dir"])
    truth = load_array(os.path.join(ex_dir, "truth.json"))
    y = load_array(os.path.join(ex_dir, "y.json"))
    coils = load_array(os.path.join(ex_dir, "coils.json"))
    masks = load_array(os.path.join(ex_dir, "masks.json"))
    op = AcquisitionOperator(coils, np.real(masks))
    if y.shape != (op.n_shots, op.n_coils) + op.grid_shape:
        raise DataError(f"example {entry['index']}: k-space shape {y.shape} "
                        "does not match its operator")
    return y, truth, op


def load_dataset(dataset_dir: str):
    """Load all examples; they must share one acquisition operator."""
    manifest = load_manifest(dataset_dir)
    ys, truths, op = [], [], None
    for entry in manifest["examples"]:
        y, truth, ex_op = load_example(dataset_dir, entry)
        if op is None:
            op = ex_op
        elif not (np.array_equal(op.coil_maps, ex_op.coil_maps)
                  and np.array_equal(op.shot_masks, ex_op.shot_masks)):
            raise DataError("examples do not share one acquisition operator")
        ys.append(y)
        truths.append(truth)
    if op is None:
        raise DataError("dataset has no examples")
    return np.stack(ys), np.stack(truths), op, manifest


# ---------------------------------------------------------------------------
# checkpoint persistence

def _net_entry(prefix, net, ckpt_dir):
    layers = []
    for i, layer in enumerate(net.layers):
        wname = f"{prefix}_w{i}.json"
        bname = f"{prefix}_b{i}.json"
        save_array(os.path.join(ckpt_dir, wname), layer.weights)
        save_array(os.path.join(ckpt_dir, bname), layer.bias)
        layers.append({"weights": wname, "bias": bname,
                       "activation": layer.activation})
    return layers


def save_checkpoint(ckpt_dir: str, params: UnrolledParams, unroll: dict) -> None:
    os.makedirs(ckpt_dir, exist_ok=True)
    header = {
        "version": CHECKPOINT_VERSION,
        "unroll": unroll,
        "kspace_net": _net_entry("k", params.kspace_net, ckpt_dir),
    }
    if params.image_net is not None:
        header["image_net"] = _net_entry("i", params.image_net, ckpt_dir)
    with open(os.path.join(ckpt_dir, "checkpoint.json"), "w") as f:
        json.dump(header, f, indent=2, sort_keys=True)
        f.write("\n")


def _net_from_entry(entries, ckpt_dir):
    layers = []
    for e in entries:
        layers.append(ConvLayer(load_array(os.path.join(ckpt_dir, e["weights"])),
                                load_array(os.path.join(ckpt_dir, e["bias"])),
                                e["activation"]))
    return DenoiserParams(layers)


def load_checkpoint(ckpt_dir: str):
    path = os.path.join(ckpt_dir, "checkpoint.json")
    try:
        with open(path) as f:
            header = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read checkpoint {path}: {exc}") from exc
    if header.get("version") != CHECKPOINT_VERSION:
        raise DataError(f"unsupported checkpoint version {header.get('version')}")
    knet = _net_from_entry(header["kspace_net"], ckpt_dir)
    inet = None
    if "image_net" in header:
        inet = _net_from_entry(header["image_net"], ckpt_dir)
    return UnrolledParams(knet, inet), header["unroll"]


# ---------------------------------------------------------------------------
# commands

def _echo_config(resolved, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "config.json"), "w") as f:
        f.write(cfgmod.dumps(resolved))


def cmd_simulate(resolved: dict, out_dir: str) -> None:
    write_dataset(resolved, out_dir)
    _echo_config(resolved, out_dir)


def _write_metrics_csv(path, rows, means):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["example", "psnr", "ssim"])
        for idx, r in rows:
            writer.writerow([idx, repr(r.mean_psnr), repr(r.mean_ssim)])
        writer.writerow(["mean", repr(means[0]), repr(means[1])])


def _reconstruct_one(method, y, op, resolved, params, mode):
    if method == "zero-filled":
        return op.adjoint(y)
    if method == "irls":
        rho, _ = irls_reconstruct(y, op, cfgmod.solver_support(resolved),
                                  cfgmod.solver_config(resolved))
        return rho
    cfg = cfgmod.unroll_config(resolved, mode=mode)
    return unrolled_forward(y, op, params, cfg)


def cmd_reconstruct(resolved: dict, out_dir: str, checkpoint: str | None) -> None:
    dataset_dir = resolved["paths"]["dataset"]
    if not dataset_dir:
        raise ConfigError("paths.dataset is required for reconstruct")
    method = resolved["method"]
    ys, truths, op, _ = load_dataset(dataset_dir)
    params, mode = None, None
    if method in ("modl-kspace", "modl-hybrid"):
        mode = "kspace-only" if method == "modl-kspace" else "hybrid"
        ckpt = checkpoint or resolved["paths"]["checkpoint"]
        if not ckpt:
            raise DataError(f"method {method} requires a checkpoint path")
        params, ckpt_unroll = load_checkpoint(ckpt)
        if ckpt_unroll["mode"] != mode:
            raise DataError(
                f"checkpoint was trained in mode {ckpt_unroll['mode']!r}, "
                f"required {mode!r}")
        resolved = dict(resolved)
        resolved["unroll"] = ckpt_unroll
    os.makedirs(out_dir, exist_ok=True)
    rows = []
    for idx in range(ys.shape[0]):
        recon = _reconstruct_one(method, ys[idx], op, resolved, params, mode)
        ex_dir = os.path.join(out_dir, "examples", f"{idx:04d}")
        os.makedirs(ex_dir, exist_ok=True)
        save_array(os.path.join(ex_dir, "recon.json"), recon)
        save_array(os.path.join(ex_dir, "sos.json"), sos_combine(recon))
        rows.append((idx, report(truths[idx], recon)))
    means = (float(np.mean([r.mean_psnr for _, r in rows])),
             float(np.mean([r.mean_ssim for _, r in rows])))
    _write_metrics_csv(os.path.join(out_dir, "metrics.csv"), rows, means)
    _echo_config(resolved, out_dir)


def cmd_train(resolved: dict, out_dir: str) -> None:
    dataset_dir = resolved["paths"]["dataset"]
    if not dataset_dir:
        raise ConfigError("paths.dataset is required for train")
    ys, truths, op, _ = load_dataset(dataset_dir)
    tcfg = cfgmod.train_config(resolved)
    ucfg = cfgmod.unroll_config(resolved)
    n_val = max(1, round(tcfg.val_fraction * ys.shape[0])) if ys.shape[0] > 1 else 0
    n_train = ys.shape[0] - n_val
    if n_train < 1:
        raise DataError("dataset too small to split off a validation set")
    from .unrolled import init_params
    params = init_params(op.n_shots, ucfg, resolved["seed"])
    os.makedirs(out_dir, exist_ok=True)
    ckpt_dir = os.path.join(out_dir, "checkpoint")
    unroll_echo = dict(resolved["unroll"])
    try:
        params, history = train_unrolled(
            ys[:n_train], truths[:n_train],
            ys[n_train:] if n_val else ys[:1],
            truths[n_train:] if n_val else truths[:1],
            op, params, ucfg, tcfg, resolved["seed"])
    finally:
        # on divergence the params still hold the last finite values
        save_checkpoint(ckpt_dir, params, unroll_echo)
        _echo_config(resolved, out_dir)
    with open(os.path.join(out_dir, "loss.csv"), "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["epoch", "train_loss", "val_loss"])
        for epoch, train_loss, val_loss in history:
            writer.writerow([epoch, repr(train_loss), repr(val_loss)])


def cmd_evaluate(resolved: dict, out_dir: str) -> None:
    dataset_dir = resolved["paths"]["dataset"]
    recon_dir = resolved["paths"]["recon"]
    if not dataset_dir or not recon_dir:
        raise ConfigError("paths.dataset and paths.recon are required for evaluate")
    manifest = load_manifest(dataset_dir)
    rows = []
    for entry in manifest["examples"]:
        _, truth, _ = load_example(dataset_dir, entry)
        recon_path = os.path.join(recon_dir, "examples",
                                  f"{entry['index']:04d}", "recon.json")
        recon = load_array(recon_path)
        if recon.shape != truth.shape:
            raise DataError(f"example {entry['index']}: reconstruction shape "
                            f"{recon.shape} != truth {truth.shape}")
        rows.append((entry["index"], report(truth, recon)))
    means = (float(np.mean([r.mean_psnr for _, r in rows])),
             float(np.mean([r.mean_ssim for _, r in rows])))
    os.makedirs(out_dir, exist_ok=True)
    _write_metrics_csv(os.path.join(out_dir, "metrics.csv"), rows, means)
    _echo_config(resolved, out_dir)


# ---------------------------------------------------------------------------
# entry point

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="msrecon",
        description="Multishot diffusion MRI reconstruction toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("simulate", "reconstruct", "train", "evaluate"):
        p = sub.add_parser(name)
        p.add_argument("--config", help="path to a JSON run configuration")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--method", choices=cfgmod.METHODS,
                       help="reconstruction method (reconstruct only)")
        p.add_argument("--checkpoint", help="trained model checkpoint directory")
        p.add_argument("--dataset", help="override paths.dataset")
        p.add_argument("--recon", help="override paths.recon (evaluate only)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        resolved = cfgmod.load(args.config) if args.config else cfgmod.resolve({})
        if args.seed is not None:
            resolved["seed"] = args.seed
        if args.method is not None:
            resolved["method"] = args.method
        if args.dataset is not None:
            resolved["paths"]["dataset"] = args.dataset
        if args.recon is not None:
            resolved["paths"]["recon"] = args.recon
        if args.checkpoint is not None:
            resolved["paths"]["checkpoint"] = args.checkpoint
        resolved = cfgmod.resolve(resolved)
        if args.command == "simulate":
            cmd_simulate(resolved, args.out)
        elif args.command == "reconstruct":
            cmd_reconstruct(resolved, args.out, args.checkpoint)
        elif args.command == "train":
            cmd_train(resolved, args.out)
        else:
            cmd_evaluate(resolved, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
