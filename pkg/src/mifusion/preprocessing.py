"""Per-feature z-scoring shared by the three classifiers."""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Standardizer:
    """Affine feature map ``(x - mean) / std``."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        if np.any(self.std <= 0) or not np.all(np.isfinite(self.std)):
            raise ValueError("scaler stds must be positive and finite")

    @classmethod
    def identity(cls, n_features):
        return cls(np.zeros(n_features), np.ones(n_features))

    @classmethod
    def fit(cls, X):
        X = np.asarray(X, dtype=float)
        mean = X.mean(axis=0)
        std = X.std(axis=0)
        # constant columns pass through centred but unscaled
        std = np.where(std > 0, std, 1.0)
        return cls(mean, std)

    def transform(self, X):
        return (np.asarray(X, dtype=float) - self.mean) / self.std
