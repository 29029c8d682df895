"""One-hidden-layer perceptron (sigmoid hidden, linear output) trained by
Levenberg-Marquardt on the full-batch squared error."""

import logging
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import expit

from . import serialization
from .dataset import N_CLASSES
from .errors import DataError, TrainingStalledError
from .preprocessing import Standardizer

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LmConfig:
    lambda_init: float = 1e-3
    lambda_up: float = 10.0
    lambda_down: float = 10.0
    max_epochs: int = 300
    mse_goal: float = 1e-4
    max_lambda: float = 1e10
    seed: int = 0

    def __post_init__(self):
        if self.lambda_init <= 0 or self.max_lambda <= 0:
            raise ValueError("lambda_init and max_lambda must be positive")
        if self.lambda_up <= 1 or self.lambda_down <= 1:
            raise ValueError("lambda_up and lambda_down must exceed 1")
        if self.max_epochs < 0 or self.mse_goal < 0:
            raise ValueError("max_epochs and mse_goal must be non-negative")


@dataclass(frozen=True, eq=False)
class MlpModel:
    hidden_weights: np.ndarray  # (hidden, input)
    hidden_bias: np.ndarray
    output_weights: np.ndarray  # (output, hidden)
    output_bias: np.ndarray
    scaler: Standardizer

    @property
    def input_dim(self):
        return self.hidden_weights.shape[1]

    @property
    def hidden_dim(self):
        return self.hidden_weights.shape[0]

    @property
    def output_dim(self):
        return self.output_weights.shape[0]

    @property
    def n_params(self):
        h, d, o = self.hidden_dim, self.input_dim, self.output_dim
        return h * d + h + o * h + o

    def parameters(self):
        """Flat parameter vector: hidden weights (row-major), hidden bias,
        output weights (row-major), output bias."""
        return np.concatenate([
            self.hidden_weights.ravel(), self.hidden_bias,
            self.output_weights.ravel(), self.output_bias,
        ])

    def with_parameters(self, theta):
        h, d, o = self.hidden_dim, self.input_dim, self.output_dim
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} parameters, got {theta.shape}")
        a, b, c = h * d, h * d + h, h * d + h + o * h
        return replace(
            self,
            hidden_weights=theta[:a].reshape(h, d).copy(),
            hidden_bias=theta[a:b].copy(),
            output_weights=theta[b:c].reshape(o, h).copy(),
            output_bias=theta[c:].copy(),
        )

    def to_text(self):
        return serialization.dumps(
            "mlp",
            {"input_dim": self.input_dim, "hidden_dim": self.hidden_dim, "output_dim": self.output_dim},
            {
                "scaler_mean": self.scaler.mean, "scaler_std": self.scaler.std,
                "hidden_weights": self.hidden_weights, "hidden_bias": self.hidden_bias,
                "output_weights": self.output_weights, "output_bias": self.output_bias,
            },
        )

    @classmethod
    def from_text(cls, text):
        _, arr = serialization.loads(text, "mlp")
        return cls(
            arr["hidden_weights"], arr["hidden_bias"], arr["output_weights"], arr["output_bias"],
            Standardizer(arr["scaler_mean"], arr["scaler_std"]),
        )


def mlp_init(input_dim, hidden_dim, output_dim, seed):
    """Random network with weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)) and an
    identity scaler."""
    for name, v in (("input_dim", input_dim), ("hidden_dim", hidden_dim), ("output_dim", output_dim)):
        if int(v) < 1:
            raise ValueError(f"{name} must be at least 1, got {v}")
    rng = np.random.default_rng(seed)
    r1 = 1.0 / np.sqrt(input_dim)
    r2 = 1.0 / np.sqrt(hidden_dim)
    return MlpModel(
        hidden_weights=rng.uniform(-r1, r1, (hidden_dim, input_dim)),
        hidden_bias=rng.uniform(-r1, r1, hidden_dim),
        output_weights=rng.uniform(-r2, r2, (output_dim, hidden_dim)),
        output_bias=rng.uniform(-r2, r2, output_dim),
        scaler=Standardizer.identity(input_dim),
    )


def _hidden(model, Xs):
    return expit(Xs @ model.hidden_weights.T + model.hidden_bias)


def mlp_forward(model, x):
    """Output scores for one feature row (shape (d,)) or a batch (shape (n, d))."""
    return mlp_forward_scaled(model, model.scaler.transform(np.asarray(x, dtype=float)))


def mlp_forward_scaled(model, Xs):
    return _hidden(model, Xs) @ model.output_weights.T + model.output_bias


def output_jacobian(model, Xs):
    """Derivatives of every output w.r.t. every parameter.

    Parameters
    ----------
    Xs : ndarray, shape (n, input_dim)
        Already-scaled inputs.

    Returns
    -------
    J : ndarray, shape (n * output_dim, n_params)
        Row ``i * output_dim + k`` holds the gradient of output ``k`` on
        sample ``i``; columns follow :meth:`MlpModel.parameters`.
    """
    n = Xs.shape[0]
    h, d, o = model.hidden_dim, model.input_dim, model.output_dim
    H = _hidden(model, Xs)
    A = model.output_weights[None, :, :] * (H * (1.0 - H))[:, None, :]  # (n, o, h)
    J = np.zeros((n, o, model.n_params))
    J[:, :, :h * d] = (A[:, :, :, None] * Xs[:, None, None, :]).reshape(n, o, h * d)
    J[:, :, h * d:h * d + h] = A
    c = h * d + h
    for k in range(o):
        J[:, k, c + k * h:c + (k + 1) * h] = H
    J[:, np.arange(o), c + o * h + np.arange(o)] = 1.0
    return J.reshape(n * o, model.n_params)


def lm_fit(model, Xs, T, cfg):
    """Levenberg-Marquardt on already-scaled inputs and a target matrix.

    Returns
    -------
    model : MlpModel
    history : ndarray
        Mean squared error before training followed by the value after each
        accepted step.
    """
    T = np.asarray(T, dtype=float)
    theta = model.parameters()
    I = np.eye(theta.size)

    def mse_of(m):
        return float(np.mean((T - mlp_forward_scaled(m, Xs)) ** 2))

    mse = mse_of(model)
    history = [mse]
    lam = cfg.lambda_init
    for epoch in range(cfg.max_epochs):
        if mse <= cfg.mse_goal:
            break
        J = output_jacobian(model, Xs)
        e = (T - mlp_forward_scaled(model, Xs)).ravel()
        JtJ = J.T @ J
        g = J.T @ e
        accepted = False
        singular = False
        while lam <= cfg.max_lambda:
            try:
                delta = np.linalg.solve(JtJ + lam * I, g)
                singular = not np.all(np.isfinite(delta))
            except np.linalg.LinAlgError:
                singular = True
            if not singular:
                trial = model.with_parameters(theta + delta)
                trial_mse = mse_of(trial)
                if trial_mse < mse:
                    model, theta, mse = trial, theta + delta, trial_mse
                    lam /= cfg.lambda_down
                    accepted = True
                    break
            lam *= cfg.lambda_up
        if not accepted:
            if singular:
                raise TrainingStalledError(
                    f"normal equations singular at lambda={lam:g} (epoch {epoch})",
                    best_model=model, history=np.array(history),
                )
            log.info("LM stopped at epoch %d: lambda exceeded %g", epoch, cfg.max_lambda)
            break
        history.append(mse)
    return model, np.array(history)


def one_hot(labels, n_classes=N_CLASSES):
    labels = np.asarray(labels, dtype=np.int64)
    T = np.zeros((labels.size, n_classes))
    T[np.arange(labels.size), labels] = 1.0
    return T


def mlp_train_lm(model, train, cfg):
    """Fit the z-score scaler on ``train`` and run Levenberg-Marquardt against
    one-hot targets.

    Parameters
    ----------
    model : MlpModel
        Initial weights (see :func:`mlp_init`).
    train : Dataset or tuple (X, labels)
        Labels are indices into the model outputs.
    cfg : LmConfig
    """
    if hasattr(train, "features"):
        X, y = train.features, train.class_index()
    else:
        X, y = train
    X = np.asarray(X, dtype=float)
    if len(X) == 0:
        raise DataError("training set is empty")
    scaler = Standardizer.fit(X)
    model = replace(model, scaler=scaler)
    T = one_hot(y, model.output_dim)
    return lm_fit(model, scaler.transform(X), T, cfg)
