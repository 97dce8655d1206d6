"""Gaussian-process regression with an isotropic squared-exponential kernel.

The kernel is k(a, b) = signal_variance * exp(-|a - b|^2 / (2 * lengthscale^2)),
observation noise is additive Gaussian with variance ``noise_variance``, and
the prior mean is zero (gain labels are centered near zero by construction).
Hyperparameters are fitted by maximizing the log marginal likelihood with
gradient ascent in log-parameter space; every linear solve goes through a
lower-triangular Cholesky factor of the noisy covariance matrix, and no
general matrix inverse of it is ever formed outside that factorization.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

SNAPSHOT_FORMAT = "gp-snapshot/1"
JITTER_LADDER = (0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6)


class FitError(RuntimeError):
    """Hyperparameter optimization failed to produce a finite objective."""


class SingularMatrixError(FitError):
    """Covariance stayed non-factorizable even at the largest jitter."""


@dataclass(frozen=True)
class KernelParams:
    """Kernel and noise hyperparameters; all strictly positive and finite."""

    signal_variance: float
    lengthscale: float
    noise_variance: float

    def __post_init__(self) -> None:
        for name in ("signal_variance", "lengthscale", "noise_variance"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0.0):
                raise ValueError(f"{name} must be a finite positive real, got {value!r}")

    def log_vector(self) -> np.ndarray:
        return np.log([self.signal_variance, self.lengthscale, self.noise_variance])

    @classmethod
    def from_log_vector(cls, theta: np.ndarray) -> "KernelParams":
        sf2, ls, sn2 = np.exp(np.asarray(theta, dtype=np.float64))
        return cls(float(sf2), float(ls), float(sn2))


@dataclass(frozen=True)
class Prediction:
    """Posterior mean and variance at one query point."""

    mean: float
    variance: float


class FittedRegressor(Protocol):
    def predict(self, x: np.ndarray) -> Prediction: ...


def pairwise_sqdist(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Exact squared Euclidean distances via explicit differences."""
    diff = A[:, None, :] - B[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def rbf(xi: np.ndarray, xj: np.ndarray, params: KernelParams) -> float:
    """Kernel value for one pair of points; symmetric, in (0, signal_variance]."""
    xi = np.asarray(xi, dtype=np.float64)
    xj = np.asarray(xj, dtype=np.float64)
    if xi.shape != xj.shape:
        raise ValueError(f"dimension mismatch: {xi.shape} vs {xj.shape}")
    d2 = float(np.sum((xi - xj) ** 2))
    return params.signal_variance * math.exp(-d2 / (2.0 * params.lengthscale**2))


def _kernel_matrix(D2: np.ndarray, params: KernelParams) -> np.ndarray:
    """Noise-free kernel matrix from precomputed squared distances."""
    K = params.signal_variance * np.exp(-D2 / (2.0 * params.lengthscale**2))
    np.fill_diagonal(K, params.signal_variance)
    return K


def covariance_matrix(X: np.ndarray, params: KernelParams) -> np.ndarray:
    """Noisy covariance: kernel matrix plus noise_variance on the diagonal."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 1:
        raise ValueError(f"X must be a non-empty 2-D array, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("X contains non-finite entries")
    K = _kernel_matrix(pairwise_sqdist(X, X), params)
    K[np.diag_indices_from(K)] += params.noise_variance
    return K


def _cholesky_with_jitter(K: np.ndarray) -> tuple[np.ndarray, float]:
    """Lower factor of K, escalating diagonal jitter on failure; never silent."""
    for jitter in JITTER_LADDER:
        try:
            if jitter == 0.0:
                return np.linalg.cholesky(K), 0.0
            return np.linalg.cholesky(K + jitter * np.eye(K.shape[0])), jitter
        except np.linalg.LinAlgError:
            continue
    raise SingularMatrixError(
        f"covariance not positive definite even with jitter {JITTER_LADDER[-1]!r}"
    )


def _mll_from_chol(L: np.ndarray, y: np.ndarray) -> float:
    alpha = cho_solve((L, True), y)
    n = y.shape[0]
    return float(-0.5 * y @ alpha - np.log(np.diag(L)).sum() - 0.5 * n * math.log(2.0 * math.pi))


def log_marginal_likelihood(X: np.ndarray, y: np.ndarray, params: KernelParams) -> float:
    """Log density of y under the zero-mean GP prior with additive noise."""
    y = np.asarray(y, dtype=np.float64)
    K = covariance_matrix(X, params)
    if y.shape != (K.shape[0],):
        raise ValueError(f"y has shape {y.shape}, expected ({K.shape[0]},)")
    L, _ = _cholesky_with_jitter(K)
    return _mll_from_chol(L, y)


def _mll_and_grad(D2: np.ndarray, y: np.ndarray, theta: np.ndarray) -> tuple[float, np.ndarray]:
    """Objective and its gradient w.r.t. (log sf2, log lengthscale, log sn2).

    Gradient components are 0.5 * trace((alpha alpha^T - K^-1) dK/dtheta_j),
    with K here meaning the noisy covariance.
    """
    params = KernelParams.from_log_vector(theta)
    Krbf = _kernel_matrix(D2, params)
    Kn = Krbf + params.noise_variance * np.eye(D2.shape[0])
    L, _ = _cholesky_with_jitter(Kn)
    alpha = cho_solve((L, True), y)
    n = y.shape[0]
    value = float(-0.5 * y @ alpha - np.log(np.diag(L)).sum() - 0.5 * n * math.log(2.0 * math.pi))

    Kinv = cho_solve((L, True), np.eye(n))
    W = np.outer(alpha, alpha) - Kinv
    d_sf2 = Krbf
    d_ls = Krbf * (D2 / params.lengthscale**2)
    grad = np.array(
        [
            0.5 * np.sum(W * d_sf2),
            0.5 * np.sum(W * d_ls),
            0.5 * np.trace(W) * params.noise_variance,
        ]
    )
    return value, grad


def mll_gradient(X: np.ndarray, y: np.ndarray, params: KernelParams) -> np.ndarray:
    """Analytic MLL gradient over (log sf2, log lengthscale, log sn2)."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    _, grad = _mll_and_grad(pairwise_sqdist(X, X), y, params.log_vector())
    return grad


@dataclass(frozen=True)
class GpFitConfig:
    """Gradient-ascent settings for hyperparameter fitting.

    ``restarts`` extra starting points are drawn log-uniform in [e^-2, e^2]
    per parameter, on top of the explicit ``init``. Ascent accepts a step
    only if it improves the objective, halving the step until it does, and
    stops once the improvement drops below ``tol``.
    """

    restarts: int = 3
    max_iters: int = 200
    tol: float = 1e-7
    init: tuple[float, float, float] = (1.0, 1.0, 0.1)
    seed: int = 0
    step0: float = 0.1
    step_growth: float = 1.3
    max_halvings: int = 30
    trace: bool = False


@dataclass(frozen=True, eq=False)
class GpModel:
    """A fitted GP: data, hyperparameters, and the cached factorization."""

    X: np.ndarray
    y: np.ndarray
    params: KernelParams
    L: np.ndarray
    alpha: np.ndarray
    jitter: float
    mll: float
    trace: tuple[tuple[float, ...], ...] = field(default=())

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]


def _ascend(D2, y, theta0, config: GpFitConfig):
    """Backtracking gradient ascent from one start; returns (mll, theta, path)."""
    theta = np.asarray(theta0, dtype=np.float64)
    try:
        value, grad = _mll_and_grad(D2, y, theta)
    except SingularMatrixError:
        return -np.inf, theta, []
    path = [(value, *theta)] if config.trace else []
    step = config.step0
    for _ in range(config.max_iters):
        gnorm = float(np.linalg.norm(grad))
        if gnorm == 0.0 or not math.isfinite(gnorm):
            break
        s = step
        accepted = False
        for _ in range(config.max_halvings):
            trial = theta + s * grad
            try:
                trial_value, trial_grad = _mll_and_grad(D2, y, trial)
            except SingularMatrixError:
                trial_value = -np.inf
            if math.isfinite(trial_value) and trial_value > value:
                improvement = trial_value - value
                theta, value, grad = trial, trial_value, trial_grad
                step = min(s * config.step_growth, 10.0)
                accepted = True
                break
            s *= 0.5
        if not accepted:
            break
        if config.trace:
            path.append((value, *theta))
        if improvement < config.tol:
            break
    return value, theta, path


def fit_gp(X: np.ndarray, y: np.ndarray, config: GpFitConfig = GpFitConfig()) -> GpModel:
    """Fit hyperparameters by maximum log marginal likelihood.

    Runs ascent from the configured init plus ``restarts`` seeded draws and
    keeps the run with the highest final objective.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 1:
        raise FitError(f"X must be non-empty 2-D, got shape {X.shape}")
    if y.shape != (X.shape[0],):
        raise FitError(f"y has shape {y.shape}, expected ({X.shape[0]},)")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise FitError("training data contains non-finite values")

    D2 = pairwise_sqdist(X, X)
    rng = np.random.default_rng(config.seed)
    starts = [np.log(np.asarray(config.init, dtype=np.float64))]
    for _ in range(config.restarts):
        starts.append(rng.uniform(-2.0, 2.0, size=3))

    best_value, best_theta, best_path = -np.inf, None, []
    for theta0 in starts:
        value, theta, path = _ascend(D2, y, theta0, config)
        if value > best_value:
            best_value, best_theta, best_path = value, theta, path
    if best_theta is None or not math.isfinite(best_value):
        raise FitError("all restarts diverged to a non-finite objective")

    params = KernelParams.from_log_vector(best_theta)
    K = _kernel_matrix(D2, params)
    K[np.diag_indices_from(K)] += params.noise_variance
    L, jitter = _cholesky_with_jitter(K)
    alpha = cho_solve((L, True), y)
    return GpModel(
        X=X.copy(),
        y=y.copy(),
        params=params,
        L=L,
        alpha=alpha,
        jitter=jitter,
        mll=best_value,
        trace=tuple(tuple(row) for row in best_path),
    )


def predict(model: GpModel, x_star: np.ndarray) -> Prediction:
    """Posterior mean and variance at a query point.

    mean = k*^T alpha with zero prior mean; variance =
    k(x*, x*) - k*^T (K + noise I)^-1 k* + noise, computed through the
    cached triangular factor.
    """
    x_star = np.asarray(x_star, dtype=np.float64)
    if x_star.shape != (model.dim,):
        raise ValueError(f"query has shape {x_star.shape}, expected ({model.dim},)")
    p = model.params
    d2 = np.sum((model.X - x_star) ** 2, axis=1)
    k_star = p.signal_variance * np.exp(-d2 / (2.0 * p.lengthscale**2))
    mean = float(k_star @ model.alpha)
    v = solve_triangular(model.L, k_star, lower=True)
    variance = float(p.signal_variance - v @ v + p.noise_variance)
    return Prediction(mean=mean, variance=variance)


def save_model(model: GpModel, path: str | Path) -> None:
    """Snapshot to structured text; reloading reproduces predictions exactly."""
    payload = {
        "format": SNAPSHOT_FORMAT,
        "log_params": [repr(float(v)) for v in model.params.log_vector()],
        "n": model.n,
        "d": model.dim,
        "jitter": repr(float(model.jitter)),
        "x": [[repr(float(v)) for v in row] for row in model.X],
        "y": [repr(float(v)) for v in model.y],
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=1), "utf-8")


def load_model(path: str | Path) -> GpModel:
    payload = json.loads(Path(path).read_text("utf-8"))
    if payload.get("format") != SNAPSHOT_FORMAT:
        raise ValueError(f"unsupported snapshot format {payload.get('format')!r}")
    params = KernelParams.from_log_vector(np.array([float(v) for v in payload["log_params"]]))
    X = np.array([[float(v) for v in row] for row in payload["x"]], dtype=np.float64).reshape(
        payload["n"], payload["d"]
    )
    y = np.array([float(v) for v in payload["y"]], dtype=np.float64)
    K = covariance_matrix(X, params)
    jitter = float(payload["jitter"])
    if jitter:
        K[np.diag_indices_from(K)] += jitter
    L = np.linalg.cholesky(K)
    alpha = cho_solve((L, True), y)
    return GpModel(X=X, y=y, params=params, L=L, alpha=alpha, jitter=jitter, mll=_mll_from_chol(L, y))


class FittedGp:
    """Regressor-interface adapter over a GpModel."""

    def __init__(self, model: GpModel):
        self.model = model

    def predict(self, x: np.ndarray) -> Prediction:
        return predict(self.model, x)

    def save(self, path: str | Path) -> None:
        save_model(self.model, path)


class GpRegressor:
    kind = "gp"

    def __init__(self, config: GpFitConfig = GpFitConfig()):
        self.config = config

    def fit(self, X: np.ndarray, y: np.ndarray) -> FittedGp:
        return FittedGp(fit_gp(X, y, self.config))
