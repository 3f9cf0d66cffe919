"""Run configuration for the CLI: strict JSON schema merged over desk-scale defaults."""

from __future__ import annotations

import copy
import json

from .gpr import GprOptConfig
from .surrogate import PipelineConfig
from .vae import TrainConfig


class ConfigError(Exception):
    """Invalid run configuration (parse failure, unknown key, or bad value)."""


DEFAULT_RUN_CONFIG = {
    "dataset": {
        "n_chord": 48,
        "n_span": 24,
        "n_conditions": 435,
        "mach_range": [0.5, 0.96],
        "alpha_range": [0.0, 11.5],
        "noise_std": 0.0,
        "jitter": 1.0,
        "seed": 2024,
    },
    "split": {"train_fraction": 0.7, "seed": 11},
    "pipeline": {
        "use_pca": True,
        "latent_dim": 2,
        "beta": 0.001,
        "encoder_hidden": [256, 128, 64, 32, 16],
        "decoder_hidden": [16, 32, 64, 128, 256],
        "train": {
            "learning_rate": 0.001,
            "adam_beta1": 0.9,
            "adam_beta2": 0.999,
            "adam_eps": 1e-8,
            "epochs": 2000,
            "batch_size": None,
            "seed": 7,
        },
        "gpr": {
            "restarts": 8,
            "max_iters": 200,
            "seed": 13,
            "amplitude_range": [1e-2, 1e2],
            "noise_range": [1e-8, 1e-1],
        },
    },
    "finetune": {
        "learning_rate": 1e-4,
        "adam_beta1": 0.9,
        "adam_beta2": 0.999,
        "adam_eps": 1e-8,
        "epochs": 500,
        "batch_size": None,
        "seed": 7,
    },
    "sweep": {
        "betas": [0.0, 1e-4, 1e-3, 8e-3, 6e-2, 1.0],
        "latent_dims": [2, 3, 4, 5, 6],
        "use_pca": [True, False],
        "keep_bundles": False,
    },
    "output_dir": "runs",
}


def _merge_strict(defaults, user, path=""):
    """Overlay user values on defaults, rejecting keys the schema does not know."""
    if isinstance(defaults, dict):
        if not isinstance(user, dict):
            raise ConfigError(f"{path or 'config'}: expected an object")
        merged = {}
        for key in user:
            if key not in defaults:
                raise ConfigError(f"unknown configuration key '{path + key}'")
        for key, default_value in defaults.items():
            if key in user:
                merged[key] = _merge_strict(default_value, user[key], f"{path}{key}.")
            else:
                merged[key] = copy.deepcopy(default_value)
        return merged
    return user


def _want(cond: bool, path: str, what: str):
    if not cond:
        raise ConfigError(f"{path}: {what}")


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _check_int(cfg, path, lo=None):
    v = _dig(cfg, path)
    _want(isinstance(v, int) and not isinstance(v, bool), path, f"expected an integer, got {v!r}")
    if lo is not None:
        _want(v >= lo, path, f"must be >= {lo}, got {v}")


def _check_num(cfg, path, lo=None, lo_open=None, hi_open=None):
    v = _dig(cfg, path)
    _want(_is_num(v), path, f"expected a number, got {v!r}")
    if lo is not None:
        _want(v >= lo, path, f"must be >= {lo}, got {v}")
    if lo_open is not None:
        _want(v > lo_open, path, f"must be > {lo_open}, got {v}")
    if hi_open is not None:
        _want(v < hi_open, path, f"must be < {hi_open}, got {v}")


def _check_bool(cfg, path):
    v = _dig(cfg, path)
    _want(isinstance(v, bool), path, f"expected true/false, got {v!r}")


def _check_range(cfg, path):
    v = _dig(cfg, path)
    _want(isinstance(v, list) and len(v) == 2 and all(_is_num(x) for x in v) and v[0] < v[1],
          path, f"expected [low, high] with low < high, got {v!r}")


def _check_num_list(cfg, path, lo=None, integer=False):
    v = _dig(cfg, path)
    _want(isinstance(v, list) and len(v) >= 1, path, "expected a nonempty list")
    for x in v:
        ok = isinstance(x, int) and not isinstance(x, bool) if integer else _is_num(x)
        _want(ok, path, f"bad element {x!r}")
        if lo is not None:
            _want(x >= lo, path, f"elements must be >= {lo}")


def _dig(cfg, dotted):
    node = cfg
    for part in dotted.split("."):
        node = node[part]
    return node


def validate_run_config(user: dict) -> dict:
    """Merge a user config over the defaults and validate every leaf."""
    cfg = _merge_strict(DEFAULT_RUN_CONFIG, user)
    _check_int(cfg, "dataset.n_chord", lo=2)
    _check_int(cfg, "dataset.n_span", lo=2)
    _check_int(cfg, "dataset.n_conditions", lo=2)
    _check_range(cfg, "dataset.mach_range")
    _check_range(cfg, "dataset.alpha_range")
    _check_num(cfg, "dataset.noise_std", lo=0)
    _check_num(cfg, "dataset.jitter", lo=0)
    _check_int(cfg, "dataset.seed", lo=0)
    _check_num(cfg, "split.train_fraction", lo_open=0, hi_open=1)
    _check_int(cfg, "split.seed", lo=0)
    _check_bool(cfg, "pipeline.use_pca")
    _check_int(cfg, "pipeline.latent_dim", lo=1)
    _check_num(cfg, "pipeline.beta", lo=0)
    _check_num_list(cfg, "pipeline.encoder_hidden", lo=1, integer=True)
    _check_num_list(cfg, "pipeline.decoder_hidden", lo=1, integer=True)
    for section in ("pipeline.train", "finetune"):
        _check_num(cfg, f"{section}.learning_rate", lo=0)
        _check_num(cfg, f"{section}.adam_beta1", lo=0, hi_open=1)
        _check_num(cfg, f"{section}.adam_beta2", lo=0, hi_open=1)
        _check_num(cfg, f"{section}.adam_eps", lo_open=0)
        _check_int(cfg, f"{section}.epochs", lo=1)
        batch = _dig(cfg, f"{section}.batch_size")
        _want(batch is None or (isinstance(batch, int) and not isinstance(batch, bool) and batch >= 1),
              f"{section}.batch_size", f"expected null or a positive integer, got {batch!r}")
        _check_int(cfg, f"{section}.seed", lo=0)
    _check_int(cfg, "pipeline.gpr.restarts", lo=1)
    _check_int(cfg, "pipeline.gpr.max_iters", lo=1)
    _check_int(cfg, "pipeline.gpr.seed", lo=0)
    _check_range(cfg, "pipeline.gpr.amplitude_range")
    noise_range = _dig(cfg, "pipeline.gpr.noise_range")
    _want(isinstance(noise_range, list) and len(noise_range) == 2
          and all(_is_num(x) for x in noise_range) and 0 < noise_range[0] <= noise_range[1],
          "pipeline.gpr.noise_range", f"expected [low, high] with 0 < low <= high, got {noise_range!r}")
    _check_num_list(cfg, "sweep.betas", lo=0)
    _check_num_list(cfg, "sweep.latent_dims", lo=1, integer=True)
    pca_list = _dig(cfg, "sweep.use_pca")
    _want(isinstance(pca_list, list) and len(pca_list) >= 1 and all(isinstance(x, bool) for x in pca_list),
          "sweep.use_pca", f"expected a nonempty list of booleans, got {pca_list!r}")
    _check_bool(cfg, "sweep.keep_bundles")
    _want(isinstance(cfg["output_dir"], str) and cfg["output_dir"] != "", "output_dir",
          "expected a nonempty string")
    return cfg


def load_run_config(path=None) -> dict:
    """Read and validate a JSON run config; None loads the embedded defaults."""
    if path is None:
        return validate_run_config({})
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        user = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: JSON parse error at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    if not isinstance(user, dict):
        raise ConfigError(f"{path}: top-level value must be an object")
    return validate_run_config(user)


def override_seeds(cfg: dict, seed: int) -> dict:
    """Apply the --seed flag: every section seed becomes the given value."""
    cfg = copy.deepcopy(cfg)
    cfg["dataset"]["seed"] = seed
    cfg["split"]["seed"] = seed
    cfg["pipeline"]["train"]["seed"] = seed
    cfg["pipeline"]["gpr"]["seed"] = seed
    cfg["finetune"]["seed"] = seed
    return cfg


def train_config_from_section(section: dict) -> TrainConfig:
    return TrainConfig(learning_rate=section["learning_rate"], adam_beta1=section["adam_beta1"],
                       adam_beta2=section["adam_beta2"], adam_eps=section["adam_eps"],
                       epochs=section["epochs"], batch_size=section["batch_size"],
                       seed=section["seed"])


def pipeline_config_from_run(cfg: dict, use_pca: bool | None = None, beta: float | None = None,
                             latent_dim: int | None = None, train_seed: int | None = None,
                             gpr_seed: int | None = None) -> PipelineConfig:
    """Build a PipelineConfig from the validated run config, with sweep-cell overrides."""
    pipe = cfg["pipeline"]
    train = train_config_from_section(pipe["train"])
    if train_seed is not None:
        train = TrainConfig(learning_rate=train.learning_rate, adam_beta1=train.adam_beta1,
                            adam_beta2=train.adam_beta2, adam_eps=train.adam_eps,
                            epochs=train.epochs, batch_size=train.batch_size, seed=train_seed)
    g = pipe["gpr"]
    gpr = GprOptConfig(restarts=g["restarts"], max_iters=g["max_iters"],
                       seed=g["seed"] if gpr_seed is None else gpr_seed,
                       amplitude_range=tuple(g["amplitude_range"]),
                       noise_range=tuple(g["noise_range"]))
    return PipelineConfig(
        use_pca=pipe["use_pca"] if use_pca is None else use_pca,
        latent_dim=pipe["latent_dim"] if latent_dim is None else latent_dim,
        beta=pipe["beta"] if beta is None else beta,
        encoder_hidden=tuple(pipe["encoder_hidden"]),
        decoder_hidden=tuple(pipe["decoder_hidden"]),
        train=train, gpr=gpr,
        mach_range=tuple(cfg["dataset"]["mach_range"]),
        alpha_range=tuple(cfg["dataset"]["alpha_range"]))
