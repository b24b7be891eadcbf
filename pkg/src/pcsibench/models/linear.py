"""Ridge regression on standardized features."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..dataset import Dataset
from ..errors import ConfigurationError
from ..numkit import solve_spd
from .base import TrainedModel


@dataclass(frozen=True)
class RidgeParams:
    lam: float = 1.0

    def __post_init__(self):
        if not self.lam >= 0:
            raise ConfigurationError(f"ridge lambda must be >= 0, got {self.lam}")


class RidgeModel(TrainedModel):
    family = "ridge"

    def __init__(self, feature_names, params, coef, intercept):
        super().__init__(feature_names, params)
        self.coef = np.asarray(coef, dtype=np.float64)
        self.intercept = float(intercept)

    def _predict(self, x):
        return x @ self.coef + self.intercept

    def state(self):
        return {"coef": self.coef.tolist(), "intercept": self.intercept}

    @classmethod
    def from_state(cls, feature_names, params, state):
        return cls(feature_names, params, state["coef"], state["intercept"])


def standardize(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Column means and scales; constant columns get scale 1."""
    mean = x.mean(axis=0)
    sd = x.std(axis=0)
    sd = np.where(sd > 1e-12 * np.maximum(1.0, np.abs(mean)), sd, 1.0)
    return mean, sd


def fit_ridge(data: Dataset, params: RidgeParams | None = None) -> RidgeModel:
    """Solve ``(Z'Z + lam I) b = Z'(y - mean y)`` with ``Z`` the standardized features.

    Coefficients are mapped back to the original feature scale.
    """
    params = params or RidgeParams()
    mean, sd = standardize(data.x)
    z = (data.x - mean) / sd
    y_mean = float(np.mean(data.y))
    gram = z.T @ z + params.lam * np.eye(data.p)
    beta = solve_spd(gram, z.T @ (data.y - y_mean))
    coef = beta / sd
    intercept = y_mean - float(coef @ mean)
    return RidgeModel(data.feature_names, asdict(params), coef, intercept)
