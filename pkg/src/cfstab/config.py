"""Experiment configuration: defaults, file loading, overrides, seed offset.

Configs are plain nested dicts in TOML or JSON. Every field has a default
below; a value of 0 (or "") on the fields marked "derived" selects the
documented derivation rule instead (PGD max_eps = median training-point l2
norm; SNS delta = 0.8 * max_eps; SNS step = 2 * 0.8 * max_eps / steps;
ensemble base_seed = train.seed).

`--override key=value` flags use dotted paths into existing keys, and the
CFSTAB_SEED_OFFSET environment variable shifts every field named "seed" or
ending in "_seed" for replication studies.
"""

from __future__ import annotations

import copy
import json
import os

from .errors import ConfigError

try:
    import tomllib as _toml
except ImportError:  # python < 3.11
    import tomli as _toml

DEFAULTS: dict = {
    "dataset": {
        "kind": "synth",
        "synth": {"kind": "blobs", "n": 500, "noise": 0.35, "seed": 7},
        "csv": {"path": "", "schema_file": "", "columns": [], "label": ""},
        "train_frac": 0.7,
        "split_seed": 11,
    },
    "model": {"layer_dims": [2, 32, 16, 1]},
    "train": {
        "seed": 101,
        "epochs": 100,
        "batch_size": 32,
        "learning_rate": 1e-3,
        "beta1": 0.9,
        "beta2": 0.999,
        "eps_hat": 1e-7,
        "shuffle": True,
    },
    "origins": {"count": 50, "target_class": 1},
    "methods": {
        "MinL1": {"enabled": False, "beta": 1.0, "confidence": 0.5,
                  "max_steps": 1000, "step_size": 0.05},
        "MinL2": {"enabled": True, "beta": 0.0, "confidence": 0.5,
                  "max_steps": 1000, "step_size": 0.01},
        "MinEpsPGD": {"enabled": True, "max_eps": 0.0, "n_interp": 10, "max_steps": 100},
        "SNS": {"enabled": True, "steps": 200, "grid_points": 10,
                "delta": 0.0, "step_size": 0.0},
    },
    "ensembles": {"loo_count": 20, "rs_count": 20, "base_seed": 0, "pool_seed": 17},
    "report": {"success_floor": 0.25, "formats": ["json", "csv", "txt"]},
    "generate": {"model_file": ""},
    "verify": {
        "seed": 0,
        "grad_trials": 60,
        "prop1_trials": 300,
        "theorem1_nets": 8,
        "theorem1_anchors": 2,
        "theorem1_epochs": 40,
        "theorem2_nets": 5,
        "theorem2_trials_per_net": 4,
        "theorem2_doi_samples": 60,
        "theorem2_k_grid": 400,
        "inject_grad_sign_bug": False,
    },
    "plot": {
        "seeds": [101, 102],
        "resolution": 96,
        "bbox": [],            # [] = auto from dataset extent + margin
        "model_files": [],
        "overlay_records": "",
    },
}


def _deep_merge(base: dict, override: dict, path="") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        where = f"{path}.{key}" if path else key
        if key not in out:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(out[key], dict) and isinstance(value, dict):
            out[key] = _deep_merge(out[key], value, where)
        else:
            out[key] = value
    return out


def load_config(path: str) -> dict:
    """Parse TOML/JSON (by suffix), validated against the default schema."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        if str(path).endswith(".toml"):
            doc = _toml.loads(raw.decode("utf-8"))
        else:
            doc = json.loads(raw.decode("utf-8"))
    except (ValueError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"config root must be a table/object: {path}")
    return _deep_merge(DEFAULTS, doc)


def apply_overrides(cfg: dict, overrides) -> dict:
    """Apply key=value pairs with dotted paths; keys must already exist."""
    cfg = copy.deepcopy(cfg)
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, _, raw = item.partition("=")
        node = cfg
        parts = key.split(".")
        for part in parts[:-1]:
            if not isinstance(node, dict) or part not in node:
                raise ConfigError(f"override references unknown key {key!r}")
            node = node[part]
        leaf = parts[-1]
        if not isinstance(node, dict) or leaf not in node:
            raise ConfigError(f"override references unknown key {key!r}")
        try:
            value = json.loads(raw)
        except ValueError:
            value = raw
        node[leaf] = value
    return cfg


def apply_seed_offset(cfg: dict, offset: int) -> dict:
    """Shift every seed-named integer field by the offset."""
    if offset == 0:
        return cfg

    def walk(node):
        if isinstance(node, dict):
            out = {}
            for key, value in node.items():
                if (key == "seed" or key.endswith("_seed")) and isinstance(value, int) \
                        and not isinstance(value, bool):
                    out[key] = value + offset
                else:
                    out[key] = walk(value)
            return out
        if isinstance(node, list):
            return [walk(v) for v in node]
        return node

    return walk(cfg)


def seed_offset_from_env() -> int:
    raw = os.environ.get("CFSTAB_SEED_OFFSET", "0").strip() or "0"
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"CFSTAB_SEED_OFFSET must be an integer, got {raw!r}") from None


def effective_config(path: str, overrides=None) -> dict:
    return apply_seed_offset(apply_overrides(load_config(path), overrides),
                             seed_offset_from_env())
