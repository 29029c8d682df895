"""Fusion of per-class classifier scores.

Scores are arranged as ``(..., n_classifiers, n_classes)`` arrays; the
pipeline uses three classifiers (MLP, RBF, SVM) and five classes. Two rules
are provided:

* majority voting over per-classifier, per-class binarised scores;
* a weighted sum ``S_j = sum_i n_ij * a_ij / ||a_ij||`` where ``n_ij`` is the
  normalised mutual information of classifier ``i`` on class ``j`` and
  ``||a_ij||`` is frozen from the calibration set as the RMS of that score
  column.
"""

from dataclasses import dataclass

import numpy as np

from . import serialization
from .dataset import TRAINABLE_CLASSES
from .errors import DataError, NumericError
from .metrics import ConfusionCounts, confusion, normalized_mi


def youden_threshold(scores, positive):
    """Cut-off maximising sensitivity + specificity - 1.

    Predictions are ``scores >= threshold``. The threshold is placed midway
    between adjacent distinct scores; ties in J go to the lowest cut.
    """
    s = np.asarray(scores, dtype=float)
    t = np.asarray(positive, dtype=bool)
    n_pos, n_neg = int(t.sum()), int((~t).sum())
    if n_pos == 0 or n_neg == 0:
        raise DataError("threshold fitting needs positive and negative samples")
    u = np.unique(s)
    ps = np.sort(s[t])
    ns = np.sort(s[~t])
    # fraction of each side scoring >= u[k]
    tpr = 1.0 - np.searchsorted(ps, u, side="left") / n_pos
    fpr = 1.0 - np.searchsorted(ns, u, side="left") / n_neg
    k = int(np.argmax(tpr - fpr))
    return float(u[0]) if k == 0 else float((u[k - 1] + u[k]) / 2)


@dataclass(frozen=True, eq=False)
class FusionModel:
    weights: np.ndarray  # (n_classifiers, n_classes), normalised MI
    norm_factors: np.ndarray  # (n_classifiers, n_classes), calibration RMS
    vote_thresholds: np.ndarray  # (n_classifiers, n_classes)
    sum_thresholds: np.ndarray  # (n_classes,)
    calibration_counts: np.ndarray  # (n_classifiers, n_classes, 4): tp, tn, fp, fn
    mi_denominator: str = "truth"

    def __post_init__(self):
        if np.any(self.norm_factors <= 0):
            raise ValueError("norm factors must be positive")
        if np.any(self.weights < 0) or np.any(self.weights > 1):
            raise ValueError("weights must lie in [0, 1]")

    def counts(self, i, j):
        return ConfusionCounts(*(int(v) for v in self.calibration_counts[i, j]))

    def to_text(self):
        return serialization.dumps(
            "fusion",
            {"mi_denominator": self.mi_denominator},
            {
                "weights": self.weights, "norm_factors": self.norm_factors,
                "vote_thresholds": self.vote_thresholds, "sum_thresholds": self.sum_thresholds,
                "calibration_counts": self.calibration_counts.astype(np.int64),
            },
        )

    @classmethod
    def from_text(cls, text):
        sc, arr = serialization.loads(text, "fusion")
        return cls(
            arr["weights"], arr["norm_factors"], arr["vote_thresholds"], arr["sum_thresholds"],
            arr["calibration_counts"], sc["mi_denominator"],
        )


def fit_fusion(cal_outputs, cal_truth, mi_denominator="truth"):
    """Fit thresholds, weights and norm factors on a calibration set.

    Parameters
    ----------
    cal_outputs : array_like, shape (n, n_classifiers, n_classes)
    cal_truth : array_like of int, shape (n,)
        True class index of each sample.
    mi_denominator : {"truth", "prediction"}
        Marginal entropy used to normalise the mutual information.

    Raises
    ------
    DataError
        A class is missing from ``cal_truth`` or inputs are misaligned.
    NumericError
        A score column has zero variance.
    """
    A = np.asarray(cal_outputs, dtype=float)
    y = np.asarray(cal_truth, dtype=np.int64)
    if A.ndim != 3 or len(A) != len(y) or len(y) == 0:
        raise DataError("cal_outputs must be (n, classifiers, classes) aligned with cal_truth")
    if not np.all(np.isfinite(A)):
        raise DataError("calibration scores must be finite")
    _, n_clf, n_cls = A.shape
    if len(np.unique(y)) < 2:
        raise DataError("calibration needs at least two distinct classes")
    for j in range(n_cls):
        if not np.any(y == j):
            name = TRAINABLE_CLASSES[j].name if j < len(TRAINABLE_CLASSES) else str(j)
            raise DataError(f"class {name} is missing from the calibration set")

    constant = A.max(axis=0) == A.min(axis=0)
    if np.any(constant):
        i, j = (int(v) for v in np.argwhere(constant)[0])
        raise NumericError(f"classifier {i} has constant scores for class {j}; norm factor undefined")
    norm = np.sqrt(np.mean(A ** 2, axis=0))

    vote_thr = np.empty((n_clf, n_cls))
    counts = np.empty((n_clf, n_cls, 4), dtype=np.int64)
    weights = np.empty((n_clf, n_cls))
    for j in range(n_cls):
        truth = y == j
        for i in range(n_clf):
            vote_thr[i, j] = youden_threshold(A[:, i, j], truth)
            c = confusion(A[:, i, j] >= vote_thr[i, j], truth)
            counts[i, j] = (c.tp, c.tn, c.fp, c.fn)
            weights[i, j] = normalized_mi(c, mi_denominator)

    S = np.sum(weights * A / norm, axis=1)
    sum_thr = np.array([youden_threshold(S[:, j], y == j) for j in range(n_cls)])
    return FusionModel(weights, norm, vote_thr, sum_thr, counts, mi_denominator)


def normalized_scores(outputs, fusion):
    return np.asarray(outputs, dtype=float) / fusion.norm_factors


def weighted_sum(outputs, fusion):
    """``S_j = sum_i n_ij * score_ij / norm_ij`` for one sample or a batch."""
    return np.sum(fusion.weights * normalized_scores(outputs, fusion), axis=-2)


def majority_vote(outputs, fusion):
    """Threshold each classifier's scores and take a 2-of-3 vote per class.

    Returns
    -------
    bits : ndarray of int, shape (..., n_classes)
    label : int or ndarray
        The single passing class when exactly one passes; otherwise the
        class with the highest mean normalised score among the passing
        classes (or among all classes when none pass).
    """
    A = np.asarray(outputs, dtype=float)
    votes = (A >= fusion.vote_thresholds).sum(axis=-2)
    bits = (votes > A.shape[-2] // 2).astype(np.int64)
    mean_norm = normalized_scores(A, fusion).mean(axis=-2)
    n_pass = bits.sum(axis=-1, keepdims=True)
    candidates = np.where(n_pass == 0, True, bits.astype(bool))
    label = np.argmax(np.where(candidates, mean_norm, -np.inf), axis=-1)
    return bits, label


def predict_weighted(outputs, fusion):
    """Binarised weighted sums and the multiclass label ``argmax_j S_j``."""
    S = weighted_sum(outputs, fusion)
    bits = (S >= fusion.sum_thresholds).astype(np.int64)
    return bits, np.argmax(S, axis=-1)
