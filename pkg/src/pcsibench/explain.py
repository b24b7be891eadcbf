"""Model explanations: ridge coefficients, forest impurity importances, Kernel SHAP."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .artifacts import write_csv
from .errors import DataError, FamilyError, SampleBudgetError, SchemaError, ShapeError
from .models import ForestModel, RidgeModel, TrainedModel
from .numkit import solve_spd
from .rng import derive_seed

EXACT_MAX_FEATURES = 12
BACKGROUND_SIZE = 100
_CHUNK_ROWS = 1 << 16


@dataclass(frozen=True)
class CoefficientTable:
    entries: tuple[tuple[str, float], ...]

    def by_magnitude(self) -> list[tuple[str, float]]:
        return sorted(self.entries, key=lambda e: (-abs(e[1]), e[0]))

    def write_csv(self, path):
        return write_csv(path, ("feature", "coefficient"), self.entries)


@dataclass(frozen=True)
class ImportanceTable:
    entries: tuple[tuple[str, float], ...]
    no_splits: bool = False

    def write_csv(self, path):
        return write_csv(path, ("feature", "importance"), self.entries)


@dataclass(frozen=True)
class ShapExplanation:
    base_value: float
    values: np.ndarray
    prediction: float
    feature_names: tuple[str, ...]
    row_id: str = ""
    exact: bool = True


def linear_coefficients(model) -> CoefficientTable:
    """Signed ridge coefficients (original scale), averaged when given several fold models."""
    fold_models = list(model) if isinstance(model, (list, tuple)) else [model]
    if not fold_models:
        raise DataError("no models given")
    for m in fold_models:
        if not isinstance(m, RidgeModel):
            raise FamilyError(f"coefficients need a ridge model, got {getattr(m, 'family', type(m).__name__)!r}")
    names = fold_models[0].feature_names
    if any(m.feature_names != names for m in fold_models):
        raise SchemaError("fold models disagree on the feature schema", [])
    coef = np.mean([m.coef for m in fold_models], axis=0)
    entries = sorted(zip(names, (float(c) for c in coef)), key=lambda e: (-e[1], e[0]))
    return CoefficientTable(tuple(entries))


def impurity_importance(model) -> ImportanceTable:
    """Total squared-error reduction per feature over all splits of all trees, normalized to 1."""
    if not isinstance(model, ForestModel):
        raise FamilyError(f"impurity importance needs a forest model, got {getattr(model, 'family', '?')!r}")
    p = len(model.feature_names)
    total = np.zeros(p)
    for tree in model.trees:
        split = tree.feature >= 0
        np.add.at(total, tree.feature[split], tree.gain[split])
    s = math.fsum(total)  # exactly rounded, so column order cannot change the result
    no_splits = not s > 0
    imp = np.zeros(p) if no_splits else total / s
    entries = sorted(zip(model.feature_names, (float(v) for v in imp)), key=lambda e: (-e[1], e[0]))
    return ImportanceTable(tuple(entries), no_splits)


def sample_background(x: np.ndarray, seed: int, size: int = BACKGROUND_SIZE) -> np.ndarray:
    """``size`` rows drawn without replacement (all rows if fewer), in original order."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] <= size:
        return x.copy()
    rng = np.random.default_rng(derive_seed("background", seed))
    return x[np.sort(rng.choice(x.shape[0], size=size, replace=False))]


def _coalition_values(model: TrainedModel, x: np.ndarray, background: np.ndarray, masks: np.ndarray) -> np.ndarray:
    """Mean model output over the background with coalition features fixed to ``x``."""
    m = background.shape[0]
    out = np.empty(masks.shape[0])
    per_chunk = max(1, _CHUNK_ROWS // m)
    for start in range(0, masks.shape[0], per_chunk):
        block = masks[start:start + per_chunk]
        rows = np.where(block[:, None, :], x[None, None, :], background[None, :, :])
        pred = model.predict(rows.reshape(-1, x.shape[0]))
        out[start:start + len(block)] = pred.reshape(len(block), m).mean(axis=1)
    return out


def _shapley_weights(p: int) -> np.ndarray:
    """|S|! (p - |S| - 1)! / p! for |S| = 0 .. p - 1."""
    return np.array([1.0 / (p * math.comb(p - 1, s)) for s in range(p)])


def _exact(model, x, background):
    p = x.shape[0]
    codes = np.arange(1 << p, dtype=np.int64)
    masks = ((codes[:, None] >> np.arange(p)) & 1).astype(bool)
    v = _coalition_values(model, x, background, masks)
    sizes = masks.sum(axis=1)
    w = _shapley_weights(p)
    phi = np.zeros(p)
    for j in range(p):
        without = codes[(codes >> j) & 1 == 0]
        phi[j] = float(np.sum(w[sizes[without]] * (v[without | (1 << j)] - v[without])))
    return v[0], v[-1], phi


def _sampled(model, x, background, n_samples, seed):
    p = x.shape[0]
    rng = np.random.default_rng(seed)
    sizes = np.arange(1, p)
    kernel = (p - 1) / (sizes * (p - sizes))
    kernel /= kernel.sum()
    n_pairs = (n_samples - 2 + 1) // 2
    masks = np.zeros((2 * n_pairs, p), dtype=bool)
    for i in range(n_pairs):
        s = rng.choice(sizes, p=kernel)
        chosen = rng.choice(p, size=s, replace=False)
        masks[2 * i, chosen] = True
        masks[2 * i + 1] = ~masks[2 * i]
    masks = masks[: n_samples - 2]
    ends = np.vstack([np.zeros(p, dtype=bool), np.ones(p, dtype=bool)])
    v = _coalition_values(model, x, background, np.vstack([ends, masks]))
    base, pred, v = v[0], v[1], v[2:]
    # eliminate the last attribution through the efficiency constraint
    z = masks.astype(np.float64)
    target = v - base - z[:, -1] * (pred - base)
    design = z[:, :-1] - z[:, -1:]
    gram = design.T @ design
    gram += 1e-10 * max(1.0, float(np.trace(gram)) / max(1, p - 1)) * np.eye(p - 1)
    head = solve_spd(gram, design.T @ target)
    phi = np.append(head, (pred - base) - head.sum())
    return base, pred, phi


def kernel_shap(model: TrainedModel, x, background, n_samples: int = 2048, seed: int = 0,
                row_id: str = "") -> ShapExplanation:
    """Shapley attributions of ``model`` at row ``x`` against a background sample.

    Up to ``EXACT_MAX_FEATURES`` features every coalition is enumerated.
    Beyond that ``n_samples`` coalitions (empty and full included) are drawn
    from the Shapley kernel in complementary pairs and the attributions come
    from a least-squares fit that satisfies efficiency exactly.
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    background = np.atleast_2d(np.asarray(background, dtype=np.float64))
    p = len(model.feature_names)
    if x.shape[0] != p or background.shape[1] != p:
        raise ShapeError(f"row/background width does not match the model's {p} features")
    if background.shape[0] == 0:
        raise DataError("background set is empty")
    if p <= EXACT_MAX_FEATURES:
        base, pred, phi = _exact(model, x, background)
        exact = True
    else:
        if n_samples < p + 2:
            raise SampleBudgetError(f"n_samples = {n_samples} is below p + 2 = {p + 2}")
        base, pred, phi = _sampled(model, x, background, n_samples, seed)
        exact = False
    return ShapExplanation(float(base), phi, float(pred), model.feature_names, str(row_id), exact)


def explain_rows(model: TrainedModel, data, background, n_samples: int = 2048, seed: int = 0):
    """Kernel SHAP for every row of a ``Dataset``; each row gets its own sampling seed."""
    x = model.check_schema(data)
    return [kernel_shap(model, x[i], background, n_samples, derive_seed("shap", seed, data.ids[i]), data.ids[i])
            for i in range(data.n)]


def shap_summary(explanations) -> list[tuple[str, float, float]]:
    """(feature, mean |phi|, mean phi) ranked by mean absolute attribution, ties by name."""
    explanations = list(explanations)
    if not explanations:
        raise DataError("no explanations to summarize")
    names = explanations[0].feature_names
    if any(e.feature_names != names for e in explanations):
        raise SchemaError("explanations disagree on the feature schema", [])
    phi = np.array([e.values for e in explanations])
    rows = zip(names, np.abs(phi).mean(axis=0).tolist(), phi.mean(axis=0).tolist())
    return sorted(rows, key=lambda r: (-r[1], r[0]))


def write_shap_values(path, explanations):
    names = explanations[0].feature_names if explanations else ()
    return write_csv(
        path,
        ("id", *names, "base_value", "prediction"),
        ([e.row_id, *e.values.tolist(), e.base_value, e.prediction] for e in explanations),
    )


def write_shap_summary(path, summary):
    return write_csv(path, ("feature", "mean_abs_shap", "mean_shap"), summary)
