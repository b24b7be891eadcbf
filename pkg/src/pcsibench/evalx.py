"""Stratified splitting, K-fold cross-validation, metrics and the benchmark grid."""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import models
from .artifacts import atomic_write_text, write_csv
from .dataset import Dataset
from .errors import ConfigurationError, DataError, ShapeError
from .numkit import pearson_p_value
from .rng import derive_seed
from .stats import discretize_pcsi

logger = logging.getLogger(__name__)

METRICS = ("mae", "mse", "mape", "pearson_r", "pearson_p")
BENCH_HEADER = ("family", "group", "fold", *METRICS)
TEST_FRACTION = 0.30
VAL_FRACTION = 0.07  # 10% of the 70% training share
MIN_STRATUM = 3


@dataclass(frozen=True)
class SplitPlan:
    train_idx: np.ndarray
    val_idx: np.ndarray
    test_idx: np.ndarray
    strata_bins: np.ndarray

    @property
    def fit_idx(self) -> np.ndarray:
        """Training plus validation rows; the pool K-fold runs over."""
        return np.sort(np.concatenate([self.train_idx, self.val_idx]))


@dataclass(frozen=True)
class FoldPlan:
    folds: tuple[np.ndarray, ...]

    @property
    def k(self) -> int:
        return len(self.folds)

    def split(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """(training rows, held-out rows) for fold ``i``."""
        rest = np.sort(np.concatenate([f for j, f in enumerate(self.folds) if j != i]))
        return rest, self.folds[i]


def _allocate(sizes: dict, fraction: float) -> dict:
    """Largest-remainder apportionment of ``round(fraction * total)`` across strata."""
    total = sum(sizes.values())
    target = math.floor(fraction * total + 0.5)
    ideal = {s: fraction * n for s, n in sizes.items()}
    out = {s: math.floor(v) for s, v in ideal.items()}
    order = sorted(sizes, key=lambda s: (-(ideal[s] - out[s]), s))
    for s in order[: max(0, target - sum(out.values()))]:
        out[s] += 1
    return out


def stratified_split(data: Dataset, seed: int, test_fraction: float = TEST_FRACTION,
                     val_fraction: float = VAL_FRACTION) -> SplitPlan:
    """Seeded train/validation/test split preserving the discretized-target distribution."""
    n = data.n
    if n < 10:
        raise DataError(f"splitting needs at least 10 rows, got {n}")
    if not (0 < test_fraction < 1 and 0 <= val_fraction < 1 and test_fraction + val_fraction < 1):
        raise ConfigurationError("split fractions must be positive and sum below 1")
    bins = np.array([discretize_pcsi(v) for v in data.y], dtype=np.int64)
    members = {int(b): np.flatnonzero(bins == b) for b in np.unique(bins)}
    small = sorted(b for b, rows in members.items() if len(rows) < MIN_STRATUM)
    for b in small:
        logger.warning("stratum %d has %d rows; kept entirely in training", b, len(members[b]))
    sizes = {b: len(rows) for b, rows in members.items() if b not in small}
    n_test = _allocate(sizes, test_fraction)
    n_val = _allocate(sizes, val_fraction)
    train, val, test = [], [], []
    for b, rows in members.items():
        if b in small:
            train.append(rows)
            continue
        rows = rows[np.random.default_rng(derive_seed("split", seed, b)).permutation(len(rows))]
        t, v = n_test[b], n_val[b]
        test.append(rows[:t])
        val.append(rows[t:t + v])
        train.append(rows[t + v:])

    def pack(parts):
        return np.sort(np.concatenate(parts)) if parts else np.zeros(0, dtype=np.int64)

    return SplitPlan(pack(train), pack(val), pack(test), bins)


def stratified_kfold(train_idx, strata, k: int = 5, seed: int = 0) -> FoldPlan:
    """Round-robin fold assignment per stratum after a seeded shuffle.

    ``strata`` is aligned with ``train_idx``. The fold pointer carries over
    from one stratum to the next, so overall fold sizes differ by at most one.
    """
    train_idx = np.asarray(train_idx, dtype=np.int64)
    strata = np.asarray(strata)
    if strata.shape != train_idx.shape:
        raise ShapeError("strata must align with train_idx")
    if k < 2:
        raise ConfigurationError(f"k must be >= 2, got {k}")
    if k > len(train_idx):
        raise ConfigurationError(f"k = {k} exceeds the {len(train_idx)} training rows")
    folds = [[] for _ in range(k)]
    pointer = 0
    for s in sorted(set(strata.tolist())):
        rows = train_idx[strata == s]
        rows = rows[np.random.default_rng(derive_seed("kfold", seed, s)).permutation(len(rows))]
        for r in rows:
            folds[pointer].append(int(r))
            pointer = (pointer + 1) % k
    return FoldPlan(tuple(np.array(sorted(f), dtype=np.int64) for f in folds))


@dataclass
class MetricsReport:
    mae: float
    mse: float
    mape: float
    pearson_r: float
    pearson_p: float
    per_fold: list["MetricsReport"] = field(default_factory=list)
    mean_sd: dict[str, tuple[float, float]] = field(default_factory=dict)

    def values(self) -> dict[str, float]:
        return {m: getattr(self, m) for m in METRICS}


def _pearson(y: np.ndarray, yhat: np.ndarray) -> tuple[float, float]:
    if np.ptp(y) == 0.0 or np.ptp(yhat) == 0.0:
        return math.nan, math.nan
    dy = y - y.mean()
    dh = yhat - yhat.mean()
    syy = float(dy @ dy)
    shh = float(dh @ dh)
    if syy == 0.0 or shh == 0.0:
        return math.nan, math.nan
    r = float(dy @ dh) / math.sqrt(syy * shh)
    if abs(r) > 1.0 - 4 * np.finfo(float).eps:
        r = math.copysign(1.0, r)
    p = pearson_p_value(r, len(y)) if len(y) >= 3 else math.nan
    return r, p


def metrics(y, yhat) -> MetricsReport:
    y = np.asarray(y, dtype=np.float64)
    yhat = np.asarray(yhat, dtype=np.float64)
    if y.shape != yhat.shape or y.ndim != 1:
        raise ShapeError(f"metric inputs differ in shape: {y.shape} vs {yhat.shape}")
    if len(y) < 2:
        raise ShapeError("metrics need at least 2 values")
    if np.any(y <= 0):
        raise DataError("MAPE needs strictly positive targets")
    err = np.abs(y - yhat)
    r, p = _pearson(y, yhat)
    return MetricsReport(
        mae=float(err.mean()),
        mse=float(np.mean(err * err)),
        mape=float(np.mean(err / y)),
        pearson_r=r,
        pearson_p=p,
    )


def aggregate(reports) -> MetricsReport:
    """Arithmetic mean and population standard deviation of per-fold reports."""
    reports = list(reports)
    if not reports:
        raise DataError("nothing to aggregate")
    mean_sd = {}
    for m in METRICS:
        vals = np.array([getattr(r, m) for r in reports])
        mean_sd[m] = (float(vals.mean()), float(vals.std()))
    return MetricsReport(**{m: mean_sd[m][0] for m in METRICS}, per_fold=reports, mean_sd=mean_sd)


@dataclass
class BenchmarkTable:
    cells: dict[tuple[str, str], MetricsReport]
    test: dict[tuple[str, str], MetricsReport] = field(default_factory=dict)
    seed: int = 0
    k: int = 5

    def rows(self):
        for (family, group), rep in self.cells.items():
            for i, fold in enumerate(rep.per_fold):
                yield [family, group, i, *fold.values().values()]
            if (family, group) in self.test:
                yield [family, group, "test", *self.test[(family, group)].values().values()]

    def to_dict(self) -> dict:
        out = []
        for (family, group), rep in self.cells.items():
            entry = {
                "family": family,
                "group": group,
                "mean": {m: _json_float(v[0]) for m, v in rep.mean_sd.items()},
                "sd": {m: _json_float(v[1]) for m, v in rep.mean_sd.items()},
            }
            if (family, group) in self.test:
                entry["test"] = {m: _json_float(v) for m, v in self.test[(family, group)].values().items()}
            out.append(entry)
        return {"seed": self.seed, "k": self.k, "cells": out}

    def write_csv(self, path):
        return write_csv(path, BENCH_HEADER, self.rows())

    def write_json(self, path):
        return atomic_write_text(path, json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")


def _json_float(v: float):
    return None if math.isnan(v) else v


def _fit_predict(family, params, train: Dataset, held: Dataset, seed: int) -> MetricsReport:
    model = models.fit(family, train, models.with_seed(family, params, seed))
    return metrics(held.y, model.predict(held))


def benchmark(data: Dataset, families, groups, k: int = 5, seed: int = 0, params: dict | None = None,
              include_baseline: bool = True, test_rows: bool = True, threads: int = 1,
              test_fraction: float = TEST_FRACTION, val_fraction: float = VAL_FRACTION) -> BenchmarkTable:
    """Cross-validated metrics for every (family, group) cell.

    Folds come from the training-plus-validation share of a stratified
    split; with ``test_rows`` each cell also gets one fit on that whole
    share scored on the held-out test rows. ``params`` maps family to a
    parameter object (family defaults otherwise). Every fit is seeded
    from ``(seed, family, group, fold)``, so cells do not depend on the
    order in which they are evaluated.
    """
    params = params or {}
    families = list(families)
    if include_baseline and "mean" not in families:
        families.append("mean")
    subsets = {g: data.select_group(g) for g in groups}
    plan = stratified_split(data, seed, test_fraction, val_fraction)
    pool = plan.fit_idx
    fold_plan = stratified_kfold(pool, plan.strata_bins[pool], k, seed)

    def run_cell(cell):
        family, group = cell
        sub = subsets[group]
        fam_params = params.get(family, models.default_params(family))
        reps = []
        for i in range(fold_plan.k):
            tr, te = fold_plan.split(i)
            reps.append(_fit_predict(family, fam_params, sub.take(tr), sub.take(te),
                                     derive_seed(seed, family, group, i)))
        test = None
        if test_rows:
            test = _fit_predict(family, fam_params, sub.take(pool), sub.take(plan.test_idx),
                                derive_seed(seed, family, group, "test"))
        logger.info("benchmark cell %s/%s done", family, group)
        return aggregate(reps), test

    cells = [(f, g) for f in families for g in groups]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool_exec:
            results = list(pool_exec.map(run_cell, cells))
    else:
        results = [run_cell(c) for c in cells]
    table = BenchmarkTable({}, {}, seed=seed, k=k)
    for cell, (rep, test) in zip(cells, results):
        table.cells[cell] = rep
        if test is not None:
            table.test[cell] = test
    return table
