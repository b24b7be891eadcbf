"""Gradient-free hyperparameter search: seeded random search, then (1+1) evolution.

Scores are minimized. Finite spaces small enough for the budget are
enumerated exhaustively instead.
"""

from __future__ import annotations

import itertools
import json
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import models
from .dataset import Dataset
from .errors import ConfigurationError, SearchFailureError

logger = logging.getLogger(__name__)

KINDS = ("continuous-log", "continuous-linear", "integer", "categorical")

_STEP_UP = 1.5
_STEP_DOWN = 1.5 ** -0.25


@dataclass(frozen=True)
class Dim:
    name: str
    kind: str
    low: float | None = None
    high: float | None = None
    choices: tuple = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown dimension kind {self.kind!r} for {self.name}")
        if self.kind == "categorical":
            if not self.choices:
                raise ConfigurationError(f"categorical dimension {self.name} has no choices")
            object.__setattr__(self, "choices", tuple(self.choices))
        else:
            if self.low is None or self.high is None or self.low > self.high:
                raise ConfigurationError(f"dimension {self.name} needs ordered bounds")
            if self.kind == "continuous-log" and self.low <= 0:
                raise ConfigurationError(f"log dimension {self.name} needs positive bounds")

    @property
    def finite(self) -> bool:
        return self.kind in ("integer", "categorical")

    def values(self):
        if self.kind == "categorical":
            return list(self.choices)
        return list(range(int(self.low), int(self.high) + 1))

    def sample(self, rng: np.random.Generator):
        if self.kind == "continuous-log":
            return float(math.exp(rng.uniform(math.log(self.low), math.log(self.high))))
        if self.kind == "continuous-linear":
            return float(rng.uniform(self.low, self.high))
        if self.kind == "integer":
            return int(rng.integers(int(self.low), int(self.high) + 1))
        return self.choices[int(rng.integers(len(self.choices)))]

    def clamp(self, value):
        if self.kind == "categorical":
            return value
        value = min(max(value, self.low), self.high)
        return int(value) if self.kind == "integer" else float(value)


@dataclass(frozen=True)
class SearchSpace:
    dims: tuple[Dim, ...]

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(self.dims))
        names = [d.name for d in self.dims]
        if len(set(names)) != len(names):
            raise ConfigurationError("duplicate dimension names in search space")

    @classmethod
    def from_dict(cls, spec: dict) -> "SearchSpace":
        """Build from ``{name: {"kind": ..., "low": ..., "high": ...} | {"choices": [...]}}``."""
        dims = []
        for name, d in spec.items():
            kind = d.get("kind", "categorical" if "choices" in d else None)
            dims.append(Dim(name, kind, d.get("low"), d.get("high"), tuple(d.get("choices", ()))))
        return cls(tuple(dims))

    def contains(self, point: dict) -> bool:
        for d in self.dims:
            v = point[d.name]
            if d.kind == "categorical":
                if v not in d.choices:
                    return False
            elif not d.low <= v <= d.high:
                return False
        return True

    def grid_size(self) -> float:
        if not all(d.finite for d in self.dims):
            return math.inf
        return math.prod(len(d.values()) for d in self.dims)


@dataclass
class TuneResult:
    best_params: dict
    best_score: float
    history: list[tuple[int, dict, float]] = field(default_factory=list)
    n_discarded: int = 0

    def history_rows(self):
        for index, params, score in self.history:
            yield [index, json.dumps(params, sort_keys=True), repr(score)]


def search(space: SearchSpace, objective, budget: int, seed: int = 0, exhaustive_first: bool = True) -> TuneResult:
    """Minimize ``objective(params)`` within ``budget`` evaluations.

    The first ``ceil(budget / 2)`` candidates are drawn uniformly (log-uniform
    for log dimensions); the remainder mutate the best point so far with a
    step size adapted by the one-fifth success rule. Non-finite scores are
    discarded. Ties keep the earliest evaluation.
    """
    if budget < 1:
        raise ConfigurationError(f"budget must be >= 1, got {budget}")
    rng = np.random.default_rng(seed)
    history: list[tuple[int, dict, float]] = []
    discarded = 0
    best: tuple[dict, float] | None = None

    def evaluate(index: int, params: dict) -> bool:
        nonlocal best, discarded
        score = objective(dict(params))
        try:
            score = float(score)
        except (TypeError, ValueError):
            score = math.nan
        if not math.isfinite(score):
            discarded += 1
            return False
        history.append((index, dict(params), score))
        if best is None or score < best[1]:
            best = (dict(params), score)
            return True
        return False

    if exhaustive_first and space.grid_size() <= budget:
        names = [d.name for d in space.dims]
        for i, combo in enumerate(itertools.product(*(d.values() for d in space.dims))):
            evaluate(i, dict(zip(names, combo)))
    else:
        n_random = math.ceil(budget / 2)
        for i in range(n_random):
            evaluate(i, {d.name: d.sample(rng) for d in space.dims})
        steps = {d.name: 0.25 for d in space.dims}
        for i in range(n_random, budget):
            if best is None:
                evaluate(i, {d.name: d.sample(rng) for d in space.dims})
                continue
            child = _mutate(space, best[0], steps, rng)
            improved = evaluate(i, child)
            factor = _STEP_UP if improved else _STEP_DOWN
            for name in steps:
                steps[name] = min(max(steps[name] * factor, 1e-6), 2.0)

    if best is None:
        raise SearchFailureError(f"all {discarded} candidates returned non-finite scores")
    return TuneResult(best_params=best[0], best_score=best[1], history=history, n_discarded=discarded)


def _mutate(space: SearchSpace, parent: dict, steps: dict, rng: np.random.Generator) -> dict:
    child = dict(parent)
    n_cat = sum(d.kind == "categorical" for d in space.dims)
    for d in space.dims:
        s = steps[d.name]
        v = parent[d.name]
        if d.kind == "continuous-log":
            child[d.name] = d.clamp(v * math.exp(s * 2.0 * rng.standard_normal()))
        elif d.kind == "continuous-linear":
            child[d.name] = d.clamp(v + s * (d.high - d.low) * rng.standard_normal())
        elif d.kind == "integer":
            jump = int(rng.geometric(0.5))
            child[d.name] = d.clamp(v + (jump if rng.random() < 0.5 else -jump))
        elif rng.random() < 1.0 / max(n_cat, 1):
            child[d.name] = d.sample(rng)
    return child


def validation_objective(train: Dataset, val: Dataset, family: str, base_params=None, seed: int = 0):
    """Callback mapping hyperparameters to validation MAE of a fitted ``family`` model.

    Fit failures score as ``inf`` so the search discards them.
    """
    overlap = set(train.ids) & set(val.ids)
    if overlap:
        raise ConfigurationError(f"train and validation sets share {len(overlap)} rows")
    base = base_params if base_params is not None else models.default_params(family)
    base = models.with_seed(family, base, seed)

    def objective(params: dict) -> float:
        try:
            p = replace(base, **params) if base is not None else None
            model = models.fit(family, train, p)
            pred = model.predict(val)
        except (ArithmeticError, ValueError) as exc:
            logger.info("fit failed for %s %s: %s", family, params, exc)
            return math.inf
        return float(np.mean(np.abs(val.y - pred)))

    return objective
