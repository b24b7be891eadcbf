"""Run configuration: one YAML/JSON file, resolved against explicit defaults."""

from __future__ import annotations

import copy
import hashlib
import json
from pathlib import Path

import yaml

from . import models
from .cohort import DEFAULT_INCOME_LEVELS, DEFAULT_SYMPTOMS
from .errors import ConfigurationError
from .rules import PcsiRules
from .synth import SynthConfig
from .tune import SearchSpace

DEFAULTS: dict = {
    "seed": 7,
    "symptoms": list(DEFAULT_SYMPTOMS),
    "income_levels": list(DEFAULT_INCOME_LEVELS),
    "input": {"static": None, "records": None, "vaccination": None},
    "synth": {
        "n_participants": 500,
        "seed": None,
        "female_fraction": 0.64,
        "noise_sd": 0.5,
        "missing_rate": 0.0,
        "questionnaires_per_window": 3,
        "symptom_noise_sd": 0.6,
        "planted_weights": None,
        "intercept": None,
    },
    "rules": {"persistence_score": 3.0, "elevation": 1.0, "baseline_cutoff": -7, "window": [90, 150]},
    "split": {"test_fraction": 0.30, "val_fraction": 0.07},
    "stats": {"n_axes": 5},
    "bench": {
        "families": list(models.FAMILIES),
        "groups": ["all", "static", "symptoms", "vaccination"],
        "k": 5,
        "include_baseline": True,
        "test_rows": True,
    },
    "models": {"ridge": {}, "forest": {"n_estimators": 100}, "gboost": {}, "mlp": {}},
    "tune": {"budget": 20, "spaces": {}},
    "explain": {"shap_family": "mlp", "n_rows": 40, "n_samples": 1024, "background": 100},
}

# keys whose value is a free-form mapping rather than a fixed section
_OPEN_KEYS = {"planted_weights", "models", "spaces"}


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigurationError(f"unknown configuration key {where!r}")
        if isinstance(base[key], dict) and key not in _OPEN_KEYS:
            if not isinstance(value, dict):
                raise ConfigurationError(f"configuration key {where!r} must be a mapping")
            out[key] = _merge(base[key], value, where + ".")
        elif key in _OPEN_KEYS and base[key] is not None and isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigurationError(f"configuration key {where!r} must be a mapping")
            merged = copy.deepcopy(base[key])
            for k, v in value.items():
                merged[k] = {**merged.get(k, {}), **v} if isinstance(v, dict) and isinstance(merged.get(k), dict) else v
            out[key] = merged
        else:
            out[key] = value
    return out


def load_config_file(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        data = json.loads(text) if path.suffix.lower() == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigurationError(f"cannot parse config {path}: {exc}") from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigurationError(f"config {path} must hold a mapping at top level")
    return data


def resolve(user: dict | None = None, seed: int | None = None) -> dict:
    """Defaults overlaid with ``user`` and a command-line seed, with every seed made explicit."""
    cfg = _merge(DEFAULTS, user or {})
    if seed is not None:
        cfg["seed"] = int(seed)
        cfg["synth"]["seed"] = None
    if cfg["synth"]["seed"] is None:
        cfg["synth"]["seed"] = cfg["seed"]
    validate(cfg)
    return cfg


def validate(cfg: dict) -> None:
    rules_of(cfg)
    synth_config(cfg)
    for family in cfg["models"]:
        if family not in models.FAMILIES:
            raise ConfigurationError(f"unknown model family {family!r} under models")
        model_params(cfg, family)
    bench = cfg["bench"]
    for family in bench["families"]:
        if family not in models.FAMILIES and family != "mean":
            raise ConfigurationError(f"unknown model family {family!r} under bench.families")
    for group in bench["groups"]:
        if group not in ("all", "static", "symptoms", "vaccination"):
            raise ConfigurationError(f"unknown feature group {group!r}")
    if not isinstance(bench["k"], int) or bench["k"] < 2:
        raise ConfigurationError("bench.k must be an integer >= 2")
    for family, space in cfg["tune"]["spaces"].items():
        if family not in models.FAMILIES:
            raise ConfigurationError(f"unknown model family {family!r} under tune.spaces")
        search_space(cfg, family)
    if int(cfg["tune"]["budget"]) < 1:
        raise ConfigurationError("tune.budget must be >= 1")
    ex = cfg["explain"]
    if ex["shap_family"] not in models.FAMILIES:
        raise ConfigurationError(f"unknown explain.shap_family {ex['shap_family']!r}")
    for key in ("n_rows", "n_samples", "background"):
        if not isinstance(ex[key], int) or ex[key] < 1:
            raise ConfigurationError(f"explain.{key} must be a positive integer")


def rules_of(cfg: dict) -> PcsiRules:
    r = cfg["rules"]
    try:
        return PcsiRules(float(r["persistence_score"]), float(r["elevation"]), int(r["baseline_cutoff"]),
                         tuple(r["window"]))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigurationError):
            raise
        raise ConfigurationError(f"invalid rules section: {exc}") from None


def synth_config(cfg: dict) -> SynthConfig:
    s = dict(cfg["synth"])
    kwargs = {k: v for k, v in s.items() if v is not None}
    kwargs["symptom_names"] = tuple(cfg["symptoms"])
    kwargs["income_levels"] = tuple(cfg["income_levels"])
    if not isinstance(kwargs.get("n_participants"), int):
        raise ConfigurationError("synth.n_participants must be an integer")
    try:
        return SynthConfig(**kwargs)
    except TypeError as exc:
        raise ConfigurationError(f"invalid synth section: {exc}") from None


def model_params(cfg: dict, family: str, overrides: dict | None = None):
    merged = {**cfg["models"].get(family, {}), **(overrides or {})}
    if family == "mlp" and "hidden_layers" in merged:
        merged["hidden_layers"] = tuple(merged["hidden_layers"])
    try:
        return models.make_params(family, merged)
    except TypeError as exc:
        raise ConfigurationError(f"invalid {family} parameters: {exc}") from None


def search_space(cfg: dict, family: str) -> SearchSpace:
    spec = cfg["tune"]["spaces"][family]
    if not isinstance(spec, dict) or not spec:
        raise ConfigurationError(f"tune.spaces.{family} must be a non-empty mapping")
    try:
        return SearchSpace.from_dict(spec)
    except (AttributeError, TypeError) as exc:
        raise ConfigurationError(f"invalid search space for {family}: {exc}") from None


def config_hash(cfg: dict) -> str:
    """sha256 of the canonical JSON form of a resolved config."""
    text = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()
