"""Fully connected ReLU network trained with Adam on squared error."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numba as nb
import numpy as np

from ..dataset import Dataset
from ..errors import ConfigurationError, DivergenceError
from .base import TrainedModel
from .linear import standardize

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class MlpParams:
    hidden_layers: tuple[int, ...] = (126, 126, 126)
    learning_rate: float = 9e-4
    epochs: int = 200
    batch_size: int | None = 32
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "hidden_layers", tuple(int(h) for h in self.hidden_layers))
        if any(h < 1 for h in self.hidden_layers):
            raise ConfigurationError("hidden layer sizes must be positive")
        if self.epochs < 0:
            raise ConfigurationError("epochs must be >= 0")
        if self.batch_size is not None and self.batch_size < 1:
            raise ConfigurationError("batch_size must be positive (or None for full batch)")
        if not self.learning_rate > 0:
            raise ConfigurationError("learning_rate must be > 0")


def init_weights(sizes, rng: np.random.Generator) -> list[tuple[np.ndarray, np.ndarray]]:
    """He-normal weights and zero biases for consecutive layer ``sizes``."""
    layers = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        w = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out))
        layers.append((w, np.zeros(fan_out)))
    return layers


def forward(layers, x: np.ndarray) -> np.ndarray:
    h = x
    for k, (w, b) in enumerate(layers):
        h = h @ w + b
        if k < len(layers) - 1:
            h = np.maximum(h, 0.0)
    return h[:, 0]


def loss_and_grads(layers, x: np.ndarray, y: np.ndarray):
    """Mean squared error over the batch and its gradient for every (w, b)."""
    acts = [x]
    pre = []
    h = x
    for k, (w, b) in enumerate(layers):
        z = h @ w + b
        pre.append(z)
        h = np.maximum(z, 0.0) if k < len(layers) - 1 else z
        acts.append(h)
    out = acts[-1][:, 0]
    resid = out - y
    n = x.shape[0]
    loss = float(resid @ resid) / n
    delta = (2.0 / n) * resid[:, None]
    grads = [None] * len(layers)
    for k in range(len(layers) - 1, -1, -1):
        w, _ = layers[k]
        grads[k] = (acts[k].T @ delta, delta.sum(axis=0))
        if k > 0:
            delta = (delta @ w.T) * (pre[k - 1] > 0.0)
    return loss, grads


@nb.njit(cache=True, nogil=True, fastmath=True)
def _adam_step(theta, grad, m, v, lr, step):
    c1 = 1.0 - ADAM_BETA1 ** step
    c2 = 1.0 - ADAM_BETA2 ** step
    for i in range(theta.shape[0]):
        g = grad[i]
        m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g
        v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g * g
        theta[i] -= lr * (m[i] / c1) / (np.sqrt(v[i] / c2) + ADAM_EPS)


def _flat_layers(layers, buffer=None):
    """Copy ``layers`` into one flat vector and return it with (w, b) views into it."""
    total = sum(w.size + b.size for w, b in layers)
    flat = np.zeros(total) if buffer is None else buffer
    views = []
    pos = 0
    for w, b in layers:
        wv = flat[pos:pos + w.size].reshape(w.shape)
        pos += w.size
        bv = flat[pos:pos + b.size]
        pos += b.size
        wv[...] = w
        bv[...] = b
        views.append((wv, bv))
    return flat, views


class MlpModel(TrainedModel):
    family = "mlp"

    def __init__(self, feature_names, params, layers, x_mean, x_scale, y_mean, y_scale, history=()):
        super().__init__(feature_names, params)
        self.layers = [(np.asarray(w, dtype=np.float64), np.asarray(b, dtype=np.float64)) for w, b in layers]
        self.x_mean = np.asarray(x_mean, dtype=np.float64)
        self.x_scale = np.asarray(x_scale, dtype=np.float64)
        self.y_mean = float(y_mean)
        self.y_scale = float(y_scale)
        self.history = list(history)

    def _predict(self, x):
        z = (x - self.x_mean) / self.x_scale
        return forward(self.layers, z) * self.y_scale + self.y_mean

    def state(self):
        return {
            "layers": [[w.tolist(), b.tolist()] for w, b in self.layers],
            "x_mean": self.x_mean.tolist(),
            "x_scale": self.x_scale.tolist(),
            "y_mean": self.y_mean,
            "y_scale": self.y_scale,
            "history": self.history,
        }

    @classmethod
    def from_state(cls, feature_names, params, state):
        return cls(feature_names, params, state["layers"], state["x_mean"], state["x_scale"],
                   state["y_mean"], state["y_scale"], state.get("history", ()))


def fit_mlp(data: Dataset, params: MlpParams | None = None) -> MlpModel:
    """Mini-batch Adam on standardized inputs and target.

    ``history`` on the returned model holds the mean training loss of each
    epoch (standardized target scale).
    """
    params = params or MlpParams()
    rng = np.random.default_rng(params.seed)
    x_mean, x_scale = standardize(data.x)
    x = (data.x - x_mean) / x_scale
    y_mean = float(np.mean(data.y))
    y_scale = float(np.std(data.y))
    if not y_scale > 1e-12:
        y_scale = 1.0
    y = (data.y - y_mean) / y_scale

    sizes = [data.p, *params.hidden_layers, 1]
    theta, layers = _flat_layers(init_weights(sizes, rng))
    grad = np.zeros_like(theta)
    _, grad_views = _flat_layers([(np.zeros_like(w), np.zeros_like(b)) for w, b in layers], grad)
    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    n = data.n
    batch = n if params.batch_size is None else min(params.batch_size, n)
    step = 0
    history = []
    lr = params.learning_rate
    for epoch in range(params.epochs):
        perm = rng.permutation(n)
        total = 0.0
        for start in range(0, n, batch):
            rows = perm[start:start + batch]
            loss, grads = loss_and_grads(layers, x[rows], y[rows])
            if not np.isfinite(loss):
                raise DivergenceError(f"non-finite training loss at epoch {epoch}")
            for (gw, gb), (dw, db) in zip(grad_views, grads):
                gw[...] = dw
                gb[...] = db
            total += loss * len(rows)
            step += 1
            _adam_step(theta, grad, m, v, lr, step)
        epoch_loss = total / n
        if not np.isfinite(epoch_loss):
            raise DivergenceError(f"non-finite training loss at epoch {epoch}")
        history.append(epoch_loss)
    layers = [(w.copy(), b.copy()) for w, b in layers]
    params_dict = asdict(params)
    params_dict["hidden_layers"] = list(params.hidden_layers)
    return MlpModel(data.feature_names, params_dict, layers, x_mean, x_scale, y_mean, y_scale, history)
