"""Dense regression dataset with feature-group tags."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DataError, ShapeError

GROUPS = ("static", "symptoms", "vaccination")


@dataclass(frozen=True)
class Dataset:
    """Feature matrix ``x`` (n x p), target ``y`` and per-column metadata."""

    x: np.ndarray
    y: np.ndarray
    feature_names: tuple[str, ...]
    feature_groups: dict[str, str] = field(default_factory=dict)
    ids: tuple[str, ...] = ()
    constant_features: tuple[str, ...] = ()

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.float64)
        if x.ndim != 2:
            raise ShapeError(f"x must be 2-D, got shape {x.shape}")
        n, p = x.shape
        if y.shape != (n,):
            raise ShapeError(f"y has shape {y.shape}, expected ({n},)")
        names = tuple(self.feature_names)
        if len(names) != p:
            raise ShapeError(f"{len(names)} feature names for {p} columns")
        if len(set(names)) != p:
            raise DataError("feature names must be unique")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise DataError("dataset contains non-finite values")
        ids = tuple(self.ids) if self.ids else tuple(str(i) for i in range(n))
        if len(ids) != n:
            raise ShapeError(f"{len(ids)} ids for {n} rows")
        groups = dict(self.feature_groups) or {name: "static" for name in names}
        missing = [name for name in names if name not in groups]
        if missing:
            raise DataError(f"features without a group tag: {missing}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "feature_groups", {name: groups[name] for name in names})
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "constant_features", tuple(self.constant_features))

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    def columns(self, names) -> "Dataset":
        index = {name: j for j, name in enumerate(self.feature_names)}
        cols = [index[name] for name in names]
        names = tuple(names)
        return Dataset(
            x=self.x[:, cols],
            y=self.y,
            feature_names=names,
            feature_groups={name: self.feature_groups[name] for name in names},
            ids=self.ids,
            constant_features=tuple(c for c in self.constant_features if c in names),
        )

    def select_group(self, group: str) -> "Dataset":
        """Restrict to one feature group, or return everything for ``"all"``."""
        if group == "all":
            return self
        if group not in GROUPS:
            raise ConfigurationError(f"unknown feature group {group!r}")
        names = [name for name in self.feature_names if self.feature_groups[name] == group]
        if not names:
            raise ConfigurationError(f"feature group {group!r} selects no columns")
        return self.columns(names)

    def take(self, rows) -> "Dataset":
        rows = np.asarray(rows, dtype=np.intp)
        return Dataset(
            x=self.x[rows],
            y=self.y[rows],
            feature_names=self.feature_names,
            feature_groups=self.feature_groups,
            ids=tuple(self.ids[i] for i in rows),
            constant_features=self.constant_features,
        )
