"""Single-hidden-layer neural regressor, the drop-in alternative to the GP.

One tanh hidden layer, squared-error loss, full-batch gradient descent with
seeded initialization. Being a point predictor, it reports variance 0.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .gp import FitError, Prediction


@dataclass(frozen=True)
class MlpConfig:
    hidden: int = 16
    learning_rate: float = 0.2
    iters: int = 6000
    seed: int = 0


@dataclass(frozen=True, eq=False)
class MlpModel:
    W1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: float
    final_loss: float


def fit_mlp(X: np.ndarray, y: np.ndarray, config: MlpConfig = MlpConfig()) -> MlpModel:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 1:
        raise FitError(f"X must be non-empty 2-D, got shape {X.shape}")
    if y.shape != (X.shape[0],):
        raise FitError(f"y has shape {y.shape}, expected ({X.shape[0]},)")
    n, d = X.shape
    rng = np.random.default_rng(config.seed)
    W1 = rng.normal(0.0, 1.0 / math.sqrt(d), size=(d, config.hidden))
    b1 = np.zeros(config.hidden)
    w2 = rng.normal(0.0, 1.0 / math.sqrt(config.hidden), size=config.hidden)
    b2 = 0.0
    lr = config.learning_rate
    loss = math.inf
    for _ in range(config.iters):
        H = np.tanh(X @ W1 + b1)
        pred = H @ w2 + b2
        resid = pred - y
        with np.errstate(over="ignore", invalid="ignore"):
            loss = float(np.mean(resid**2))
        if not math.isfinite(loss):
            raise FitError("training loss became non-finite")
        d_pred = (2.0 / n) * resid
        grad_w2 = H.T @ d_pred
        grad_b2 = float(d_pred.sum())
        dH = np.outer(d_pred, w2) * (1.0 - H**2)
        grad_W1 = X.T @ dH
        grad_b1 = dH.sum(axis=0)
        W1 -= lr * grad_W1
        b1 -= lr * grad_b1
        w2 -= lr * grad_w2
        b2 -= lr * grad_b2
    return MlpModel(W1=W1, b1=b1, w2=w2, b2=b2, final_loss=loss)


def predict_mlp(model: MlpModel, x: np.ndarray) -> Prediction:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.W1.shape[0],):
        raise ValueError(f"query has shape {x.shape}, expected ({model.W1.shape[0]},)")
    h = np.tanh(x @ model.W1 + model.b1)
    return Prediction(mean=float(h @ model.w2 + model.b2), variance=0.0)


def save_mlp(model: MlpModel, path: str | Path) -> None:
    payload = {
        "format": "mlp-snapshot/1",
        "W1": model.W1.tolist(),
        "b1": model.b1.tolist(),
        "w2": model.w2.tolist(),
        "b2": model.b2,
        "final_loss": model.final_loss,
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload), "utf-8")


class FittedMlp:
    def __init__(self, model: MlpModel):
        self.model = model

    def predict(self, x: np.ndarray) -> Prediction:
        return predict_mlp(self.model, x)

    def save(self, path: str | Path) -> None:
        save_mlp(self.model, path)


class MlpRegressor:
    kind = "nn"

    def __init__(self, config: MlpConfig = MlpConfig()):
        self.config = config

    def fit(self, X: np.ndarray, y: np.ndarray) -> FittedMlp:
        return FittedMlp(fit_mlp(X, y, self.config))
