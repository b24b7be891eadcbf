"""Regressor families sharing one fit/predict contract."""

from __future__ import annotations

from dataclasses import fields, replace

from ..errors import ConfigurationError, FamilyError
from .base import MeanModel, TrainedModel, fit_mean, load_model, model_from_dict, predict, save_model
from .ensemble import ForestModel, ForestParams, GboostModel, GboostParams, fit_forest, fit_gboost
from .linear import RidgeModel, RidgeParams, fit_ridge
from .mlp import MlpModel, MlpParams, fit_mlp

FAMILIES = ("ridge", "forest", "gboost", "mlp")

PARAM_TYPES = {
    "ridge": RidgeParams,
    "forest": ForestParams,
    "gboost": GboostParams,
    "mlp": MlpParams,
    "mean": None,
}

FIT_FUNCTIONS = {
    "ridge": fit_ridge,
    "forest": fit_forest,
    "gboost": fit_gboost,
    "mlp": fit_mlp,
    "mean": fit_mean,
}


def default_params(family: str):
    try:
        cls = PARAM_TYPES[family]
    except KeyError:
        raise FamilyError(f"unknown model family {family!r}") from None
    return cls() if cls is not None else None


def make_params(family: str, overrides: dict | None = None):
    """Family defaults with ``overrides`` applied; unknown keys are rejected."""
    params = default_params(family)
    if not overrides:
        return params
    if params is None:
        raise ConfigurationError(f"family {family!r} takes no parameters")
    known = {f.name for f in fields(params)}
    unknown = sorted(set(overrides) - known)
    if unknown:
        raise ConfigurationError(f"unknown {family} parameters: {unknown}")
    return replace(params, **overrides)


def with_seed(family: str, params, seed: int):
    if params is not None and "seed" in {f.name for f in fields(params)}:
        return replace(params, seed=seed)
    return params


def fit(family: str, data, params=None) -> TrainedModel:
    try:
        fn = FIT_FUNCTIONS[family]
    except KeyError:
        raise FamilyError(f"unknown model family {family!r}") from None
    return fn(data, params if params is not None else default_params(family))


__all__ = [
    "FAMILIES", "fit", "make_params", "default_params", "with_seed", "predict",
    "TrainedModel", "MeanModel", "RidgeModel", "ForestModel", "GboostModel", "MlpModel",
    "RidgeParams", "ForestParams", "GboostParams", "MlpParams",
    "fit_ridge", "fit_forest", "fit_gboost", "fit_mlp", "fit_mean",
    "save_model", "load_model", "model_from_dict",
]
