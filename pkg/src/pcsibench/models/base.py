"""Common fit/predict contract and the JSON model format."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..dataset import Dataset
from ..errors import ConfigurationError, SchemaError, ShapeError

FORMAT_NAME = "pcsibench.model"
FORMAT_VERSION = 1

_REGISTRY: dict[str, type["TrainedModel"]] = {}


class TrainedModel:
    """A fitted regressor bound to the column schema it was trained on."""

    family: str = ""

    def __init__(self, feature_names, params: dict):
        self.feature_names = tuple(feature_names)
        self.params = dict(params)

    def __init_subclass__(cls, **kwargs):
        super().__init_subclass__(**kwargs)
        if cls.family:
            _REGISTRY[cls.family] = cls

    def _predict(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def check_schema(self, data) -> np.ndarray:
        if isinstance(data, Dataset):
            names = data.feature_names
            if names != self.feature_names:
                offending = sorted(
                    {a for a, b in zip(names, self.feature_names) if a != b}
                    | set(names).symmetric_difference(self.feature_names)
                )
                raise SchemaError(f"column schema differs from fit time: {offending}", offending)
            return data.x
        x = np.asarray(data, dtype=np.float64)
        if x.ndim == 1:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != len(self.feature_names):
            raise ShapeError(f"expected {len(self.feature_names)} columns, got shape {x.shape}")
        return x

    def predict(self, data) -> np.ndarray:
        """Predict for a ``Dataset`` (schema-checked by name) or a raw matrix."""
        return self._predict(self.check_schema(data))

    def state(self) -> dict:
        raise NotImplementedError

    @classmethod
    def from_state(cls, feature_names, params, state) -> "TrainedModel":
        raise NotImplementedError

    def to_dict(self) -> dict:
        return {
            "format": FORMAT_NAME,
            "version": FORMAT_VERSION,
            "family": self.family,
            "feature_names": list(self.feature_names),
            "params": self.params,
            "state": self.state(),
        }


def predict(model: TrainedModel, data) -> np.ndarray:
    return model.predict(data)


def model_from_dict(d: dict) -> TrainedModel:
    if d.get("format") != FORMAT_NAME:
        raise ConfigurationError("not a serialized model")
    if d.get("version") != FORMAT_VERSION:
        raise ConfigurationError(f"unsupported model format version {d.get('version')}")
    try:
        cls = _REGISTRY[d["family"]]
    except KeyError:
        raise ConfigurationError(f"unknown model family {d.get('family')!r}") from None
    return cls.from_state(d["feature_names"], d["params"], d["state"])


def save_model(model: TrainedModel, path) -> None:
    Path(path).write_text(json.dumps(model.to_dict()), encoding="utf-8")


def load_model(path) -> TrainedModel:
    return model_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


class MeanModel(TrainedModel):
    """Predicts the training-target mean; the benchmark's reference row."""

    family = "mean"

    def __init__(self, feature_names, params, mean: float):
        super().__init__(feature_names, params)
        self.mean = float(mean)

    def _predict(self, x):
        return np.full(x.shape[0], self.mean)

    def state(self):
        return {"mean": self.mean}

    @classmethod
    def from_state(cls, feature_names, params, state):
        return cls(feature_names, params, state["mean"])


def fit_mean(data: Dataset, params=None) -> MeanModel:
    return MeanModel(data.feature_names, {}, float(np.mean(data.y)))
