"""Layered run configuration: defaults < config file(s) < command-line flags."""

from __future__ import annotations

import copy
import json
import os
from pathlib import Path

from .errors import ConfigError

ENV_CONFIG = "LATENTQC_CONFIG"

DEFAULTS: dict[str, dict] = {
    "schedule": {"T": 100, "beta_start": None, "beta_end": None},
    "codec": {"channels": 4, "projection_seed": 0},
    "train": {
        "steps": 2000, "batch": 16, "lr": 1e-3, "margin": 1.2, "lam": 0.5,
        "seed": 0, "mode": "basic", "beta1": 0.9, "beta2": 0.999,
        "adam_eps": 1e-8, "hidden": 32, "time_dim": 16,
    },
    "inference": {
        "t_star": None, "draws": None, "seed": 0, "patch": 256, "stride": None, "jobs": 1,
    },
    "postprocess": {
        "v_min": 0.0, "v_max": 1.0, "sigma": 1.5, "bins": 256, "morph_radius": 1,
    },
    "calibrate": {"lo_quantile": 0.95, "hi_factor": 3.0, "count": 64},
    "synth": {
        "seed": 0, "size": 256, "train_count": 200, "artifact_count": 40,
        "test_count": 100, "test_clean_fraction": 0.5,
        "mix": {"oof": 0.25, "penmark": 0.25, "fold": 0.25, "bubble": 0.25},
        "area": [0.08, 0.30],
    },
}

# Dedicated flags and the keys they set.
FLAG_KEYS = {
    "seed": ("train.seed", "inference.seed", "synth.seed"),
    "jobs": ("inference.jobs",),
    "vmin": ("postprocess.v_min",),
    "vmax": ("postprocess.v_max",),
    "tstar": ("inference.t_star",),
    "draws": ("inference.draws",),
}


def merge(base: dict, layer: dict, source: str) -> dict:
    out = copy.deepcopy(base)
    for section, values in layer.items():
        if section not in DEFAULTS:
            raise ConfigError(f"{source}: unknown config section {section!r}")
        if not isinstance(values, dict):
            raise ConfigError(f"{source}: section {section!r} must be a table")
        for key, value in values.items():
            if key not in DEFAULTS[section]:
                raise ConfigError(f"{source}: unknown key {section}.{key}")
            out[section][key] = value
    return out


def load_file(path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    return data


def parse_assignment(text: str) -> dict:
    """``section.key=value`` with a JSON value (bare strings allowed)."""
    if "=" not in text or "." not in text.split("=", 1)[0]:
        raise ConfigError(f"override {text!r} is not of the form section.key=value")
    dotted, raw = text.split("=", 1)
    section, key = dotted.split(".", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return {section: {key: value}}


def resolve(config_paths=(), sets=(), flags: dict | None = None,
            env: dict | None = None) -> dict:
    env = os.environ if env is None else env
    cfg = copy.deepcopy(DEFAULTS)
    paths = list(config_paths)
    if not paths and env.get(ENV_CONFIG):
        paths = [env[ENV_CONFIG]]
    for p in paths:
        cfg = merge(cfg, load_file(p), str(p))
    for s in sets:
        cfg = merge(cfg, parse_assignment(s), "--set")
    for flag, value in (flags or {}).items():
        if value is None:
            continue
        for dotted in FLAG_KEYS[flag]:
            section, key = dotted.split(".")
            cfg[section][key] = value
    return cfg


def dump(cfg: dict, path) -> None:
    Path(path).write_text(json.dumps(cfg, indent=2, sort_keys=True) + "\n", encoding="utf-8")
