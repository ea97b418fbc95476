"""Run configuration: one JSON document with explicit defaults.

Unknown keys are rejected (with their path) rather than ignored, and every
command echoes its fully resolved configuration into the output directory,
so re-running from the echo reproduces the run bit-exactly. The output
directory itself is a CLI flag, not part of the configuration, which keeps
echoes location-independent.
"""

import json

from .errors import ConfigError
from .hankel import FilterSupport
from .simulate import SimSpec
from .solvers import SolverConfig
from .unrolled import TrainConfig, UnrollConfig

METHODS = ("irls", "modl-kspace", "modl-hybrid", "zero-filled")

_SIM_DEFAULTS = {
    "grid": [64, 64],
    "n_shots": 4,
    "n_coils": 4,
    "phase_bandwidth": [3, 3],
    "noise_sigma": 0.0,
}
_SOLVER_DEFAULTS = {
    "beta": 0.01,
    "lam": 2e-3,
    "eps": 1e-4,
    "outer_iters": 5,
    "cg_iters": 5,
    "cg_tol": 1e-9,
    "z_update_mode": "residual-approx",
    "filter_support": [3, 3],
}
_UNROLL_DEFAULTS = {
    "n_unrolls": 3,
    "cg_iters": 5,
    "lambda1": 0.01,
    "lambda2": 0.05,
    "mode": "hybrid",
    "hidden_channels": [64, 64, 64, 128, 128, 64, 64],
}
_TRAIN_DEFAULTS = {
    "epochs": 30,
    "batch_size": 4,
    "step_size": 1e-3,
    "beta1": 0.9,
    "beta2": 0.999,
    "adam_eps": 1e-8,
    "val_fraction": 0.1,
}
_PATH_DEFAULTS = {"dataset": None, "checkpoint": None, "recon": None}


def _merge_section(name, given, defaults):
    if not isinstance(given, dict):
        raise ConfigError(f"{name}: expected an object")
    unknown = set(given) - set(defaults)
    if unknown:
        raise ConfigError(f"{name}: unknown keys {sorted(unknown)}")
    merged = dict(defaults)
    merged.update(given)
    return merged


def resolve(document: dict) -> dict:
    """Validate a raw JSON document and fill in every default."""
    if not isinstance(document, dict):
        raise ConfigError("configuration must be a JSON object")
    top_defaults = {"seed": 0, "n_examples": 2, "method": "irls",
                    "sim": {}, "solver": {}, "unroll": {}, "train": {},
                    "paths": {}}
    unknown = set(document) - set(top_defaults)
    if unknown:
        raise ConfigError(f"unknown top-level keys {sorted(unknown)}")
    doc = dict(top_defaults)
    doc.update(document)
    resolved = {
        "seed": doc["seed"],
        "n_examples": doc["n_examples"],
        "method": doc["method"],
        "sim": _merge_section("sim", doc["sim"], _SIM_DEFAULTS),
        "solver": _merge_section("solver", doc["solver"], _SOLVER_DEFAULTS),
        "unroll": _merge_section("unroll", doc["unroll"], _UNROLL_DEFAULTS),
        "train": _merge_section("train", doc["train"], _TRAIN_DEFAULTS),
        "paths": _merge_section("paths", doc["paths"], _PATH_DEFAULTS),
    }
    if not isinstance(resolved["seed"], int) or resolved["seed"] < 0:
        raise ConfigError("seed: must be a non-negative integer")
    if not isinstance(resolved["n_examples"], int) or resolved["n_examples"] < 1:
        raise ConfigError("n_examples: must be a positive integer")
    if resolved["method"] not in METHODS:
        raise ConfigError(f"method: must be one of {METHODS}")
    # construct the typed configs once so their validators run here
    try:
        sim_spec(resolved)
        solver_config(resolved)
        unroll_config(resolved)
        train_config(resolved)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    return resolved


def load(path: str) -> dict:
    try:
        with open(path) as f:
            document = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return resolve(document)


def dumps(resolved: dict) -> str:
    return json.dumps(resolved, indent=2, sort_keys=True) + "\n"


def sim_spec(resolved: dict, seed: int | None = None) -> SimSpec:
    s = resolved["sim"]
    return SimSpec(grid=tuple(s["grid"]), n_shots=s["n_shots"],
                   n_coils=s["n_coils"],
                   phase_bandwidth=tuple(s["phase_bandwidth"]),
                   noise_sigma=s["noise_sigma"],
                   seed=resolved["seed"] if seed is None else seed)


def solver_config(resolved: dict) -> SolverConfig:
    s = dict(resolved["solver"])
    s.pop("filter_support")
    return SolverConfig(**s)


def solver_support(resolved: dict) -> FilterSupport:
    rows, cols = resolved["solver"]["filter_support"]
    return FilterSupport(rows, cols)


def unroll_config(resolved: dict, mode: str | None = None) -> UnrollConfig:
    u = dict(resolved["unroll"])
    if mode is not None:
        u["mode"] = mode
        if mode == "kspace-only":
            u["lambda2"] = 0.0
    u["hidden_channels"] = tuple(u["hidden_channels"])
    return UnrollConfig(**u)


def train_config(resolved: dict) -> TrainConfig:
    return TrainConfig(**resolved["train"])
