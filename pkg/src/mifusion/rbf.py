"""Gaussian radial basis function network with k-means centres and a linear
output layer solved by (ridge) least squares."""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.cluster.vq import kmeans2

from . import serialization
from .dataset import N_CLASSES
from .errors import DataError, NumericError
from .mlp import one_hot
from .preprocessing import Standardizer

#: Spread reported for raw (unscaled) ECG features.
RAW_SPREAD = 105.0
#: Default spread in z-scored feature space.
SCALED_SPREAD = 2.0


@dataclass(frozen=True, eq=False)
class RbfModel:
    centers: np.ndarray  # (M, input_dim), in scaled space
    spread: float
    output_weights: np.ndarray  # (output_dim, M)
    output_bias: np.ndarray
    scaler: Standardizer

    def __post_init__(self):
        if self.spread <= 0:
            raise ValueError("spread must be positive")
        if len(self.centers) < 1:
            raise ValueError("need at least one centre")

    @property
    def n_centers(self):
        return len(self.centers)

    def to_text(self):
        return serialization.dumps(
            "rbf",
            {"spread": float(self.spread)},
            {
                "scaler_mean": self.scaler.mean, "scaler_std": self.scaler.std,
                "centers": self.centers,
                "output_weights": self.output_weights, "output_bias": self.output_bias,
            },
        )

    @classmethod
    def from_text(cls, text):
        sc, arr = serialization.loads(text, "rbf")
        return cls(
            arr["centers"], sc["spread"], arr["output_weights"], arr["output_bias"],
            Standardizer(arr["scaler_mean"], arr["scaler_std"]),
        )


def _activations(centers, spread, Xs, chunk=4096):
    Xs = np.atleast_2d(Xs)
    out = np.empty((len(Xs), len(centers)))
    for start in range(0, len(Xs), chunk):
        diff = Xs[start:start + chunk, None, :] - centers
        out[start:start + chunk] = np.exp(-np.sum(diff * diff, axis=-1) / (2.0 * spread ** 2))
    return out


def rbf_hidden(model, x):
    """Hidden activations ``exp(-||scale(x) - c_m||^2 / (2 spread^2))``.

    Accepts one row (returns shape (M,)) or a batch (returns (n, M)).
    """
    x = np.asarray(x, dtype=float)
    Y = _activations(model.centers, model.spread, model.scaler.transform(x))
    return Y[0] if x.ndim == 1 else Y


def rbf_forward(model, x):
    """Class scores: output bias plus weighted hidden activations."""
    return rbf_hidden(model, x) @ model.output_weights.T + model.output_bias


def select_centers(Xs, n_centers, seed):
    """k-means (k-means++ seeding) centres; every point when ``n_centers == n``."""
    n = len(Xs)
    if not 1 <= n_centers <= n:
        raise DataError(f"n_centers must lie in [1, {n}], got {n_centers}")
    if n_centers == n:
        return Xs.copy()
    with warnings.catch_warnings():
        # an empty cluster keeps its previous centre
        warnings.simplefilter("ignore", UserWarning)
        centers, _ = kmeans2(Xs, n_centers, minit="++", seed=np.random.default_rng(seed))
    return centers


def solve_output_layer(Phi, T, ridge):
    """Least-squares weights for ``[1, Phi] @ W ~ T``.

    Returns
    -------
    weights : ndarray, shape (n_outputs, M)
    bias : ndarray, shape (n_outputs,)
    """
    A = np.hstack([np.ones((len(Phi), 1)), Phi])
    if ridge > 0:
        k = A.shape[1]
        A_aug = np.vstack([A, np.sqrt(ridge) * np.eye(k)])
        T_aug = np.vstack([T, np.zeros((k, T.shape[1]))])
        W, *_ = np.linalg.lstsq(A_aug, T_aug, rcond=None)
    else:
        W, _, rank, _ = np.linalg.lstsq(A, T, rcond=None)
        if rank < min(A.shape):
            raise NumericError(
                f"hidden design matrix is rank deficient ({rank} < {min(A.shape)}); use ridge > 0"
            )
    return W[1:].T.copy(), W[0].copy()


def rbf_build(train, n_centers=50, spread=SCALED_SPREAD, seed=0, ridge=1e-8, raw_features=False):
    """Fit an RBF network to one-hot targets.

    Parameters
    ----------
    train : Dataset or tuple (X, labels)
    n_centers : int
    spread : float
        Gaussian width, in the units of the (scaled unless ``raw_features``)
        input space.
    seed : int
        Seeds the k-means initialisation.
    ridge : float
        Tikhonov penalty on the output solve; 0 gives plain least squares.
    raw_features : bool
        Skip z-scoring, so ``spread`` is in raw feature units (use
        :data:`RAW_SPREAD` to mirror the original setting).
    """
    if hasattr(train, "features"):
        X, y = train.features, train.class_index()
    else:
        X, y = train
    X = np.asarray(X, dtype=float)
    if len(X) == 0:
        raise DataError("training set is empty")
    if ridge < 0:
        raise ValueError("ridge must be non-negative")
    scaler = Standardizer.identity(X.shape[1]) if raw_features else Standardizer.fit(X)
    Xs = scaler.transform(X)
    centers = select_centers(Xs, n_centers, seed)
    Phi = _activations(centers, spread, Xs)
    W, b = solve_output_layer(Phi, one_hot(y, N_CLASSES), ridge)
    return RbfModel(centers, float(spread), W, b, scaler)
