"""Random forest and gradient boosting built from the exact-split trees."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass

import numpy as np

from ..dataset import Dataset
from ..errors import ConfigurationError, DataError
from .base import TrainedModel
from .tree import TreeArrays, build_tree, encode_features, tree_seed

logger = logging.getLogger(__name__)
_clamp_warned: set[tuple[int, int]] = set()


@dataclass(frozen=True)
class ForestParams:
    n_estimators: int = 500
    max_depth: int = 12
    max_samples_fraction: float = 0.4
    max_features: int = 25
    seed: int = 0

    def __post_init__(self):
        if self.n_estimators < 1 or self.max_depth < 0 or self.max_features < 1:
            raise ConfigurationError(f"invalid forest parameters: {self}")
        if not 0.0 < self.max_samples_fraction <= 1.0:
            raise ConfigurationError("max_samples_fraction must lie in (0, 1]")


@dataclass(frozen=True)
class GboostParams:
    n_estimators: int = 500
    max_depth: int = 12
    subsample_fraction: float = 0.4
    learning_rate: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.n_estimators < 0 or self.max_depth < 0:
            raise ConfigurationError(f"invalid boosting parameters: {self}")
        if not 0.0 < self.subsample_fraction <= 1.0:
            raise ConfigurationError("subsample_fraction must lie in (0, 1]")
        if not self.learning_rate > 0:
            raise ConfigurationError("learning_rate must be > 0")


def _subsample(n: int, fraction: float, seed: int, index: int) -> np.ndarray:
    m = max(1, math.ceil(fraction * n - 1e-9))
    if m >= n:
        return np.arange(n, dtype=np.int64)
    rng = np.random.default_rng(tree_seed(seed, "rows", index))
    return np.sort(rng.choice(n, size=m, replace=False)).astype(np.int64)


class ForestModel(TrainedModel):
    family = "forest"

    def __init__(self, feature_names, params, trees, y_range):
        super().__init__(feature_names, params)
        self.trees = list(trees)
        self.y_range = (float(y_range[0]), float(y_range[1]))

    def _predict(self, x):
        x = np.ascontiguousarray(x, dtype=np.float64)
        total = np.zeros(x.shape[0])
        for tree in self.trees:
            total += tree.predict(x)
        return np.clip(total / len(self.trees), *self.y_range)

    def state(self):
        return {"trees": [t.to_dict() for t in self.trees], "y_range": list(self.y_range)}

    @classmethod
    def from_state(cls, feature_names, params, state):
        return cls(feature_names, params, [TreeArrays.from_dict(t) for t in state["trees"]], state["y_range"])


def fit_forest(data: Dataset, params: ForestParams | None = None) -> ForestModel:
    """Average of variance-reduction trees, each grown on a row subsample drawn without replacement."""
    params = params or ForestParams()
    if data.n < 2:
        raise DataError("forest needs at least 2 rows")
    max_features = params.max_features
    if max_features > data.p:
        if (max_features, data.p) not in _clamp_warned:
            _clamp_warned.add((max_features, data.p))
            logger.warning("max_features=%d exceeds %d columns; clamped", max_features, data.p)
        max_features = data.p
    enc = encode_features(data.x, data.feature_names)
    trees = []
    for t in range(params.n_estimators):
        rows = _subsample(data.n, params.max_samples_fraction, params.seed, t)
        trees.append(build_tree(enc, data.y, rows, params.max_depth, max_features,
                                tree_seed(params.seed, "forest", t)))
    y_range = (float(data.y.min()), float(data.y.max()))
    return ForestModel(data.feature_names, asdict(params), trees, y_range)


class GboostModel(TrainedModel):
    family = "gboost"

    def __init__(self, feature_names, params, init, trees, y_range):
        super().__init__(feature_names, params)
        self.init = float(init)
        self.trees = list(trees)
        self.y_range = (float(y_range[0]), float(y_range[1]))

    def staged_predict(self, x):
        """Yield the raw (unclipped) ensemble output after each stage, starting with F0."""
        x = np.ascontiguousarray(self.check_schema(x), dtype=np.float64)
        f = np.full(x.shape[0], self.init)
        yield f.copy()
        lr = self.params["learning_rate"]
        for tree in self.trees:
            f += lr * tree.predict(x)
            yield f.copy()

    def _predict(self, x):
        x = np.ascontiguousarray(x, dtype=np.float64)
        f = np.full(x.shape[0], self.init)
        lr = self.params["learning_rate"]
        for tree in self.trees:
            f += lr * tree.predict(x)
        return np.clip(f, *self.y_range)

    def state(self):
        return {"init": self.init, "trees": [t.to_dict() for t in self.trees], "y_range": list(self.y_range)}

    @classmethod
    def from_state(cls, feature_names, params, state):
        return cls(feature_names, params, state["init"],
                   [TreeArrays.from_dict(t) for t in state["trees"]], state["y_range"])


def fit_gboost(data: Dataset, params: GboostParams | None = None) -> GboostModel:
    """Squared-loss boosting: each stage fits a tree to the current residuals."""
    params = params or GboostParams()
    if data.n < 2:
        raise DataError("boosting needs at least 2 rows")
    enc = encode_features(data.x, data.feature_names)
    x = np.ascontiguousarray(data.x)
    f = np.full(data.n, float(np.mean(data.y)))
    init = float(f[0])
    trees = []
    for m in range(params.n_estimators):
        rows = _subsample(data.n, params.subsample_fraction, params.seed, m)
        tree = build_tree(enc, data.y - f, rows, params.max_depth, data.p,
                          tree_seed(params.seed, "gboost", m))
        f += params.learning_rate * tree.predict(x)
        trees.append(tree)
    y_range = (float(data.y.min()), float(data.y.max()))
    return GboostModel(data.feature_names, asdict(params), init, trees, y_range)
