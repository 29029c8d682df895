"""Confusion counts, per-class rates and the mutual-information fusion weight.

All logarithms are natural; the normalised weight is base independent.
Cells with zero probability contribute nothing (``0 * log 0 = 0``).
"""

import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)


class DegenerateEntropyWarning(UserWarning):
    """The entropy in the denominator of the normalised weight is zero."""


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    tn: int
    fp: int
    fn: int

    def __post_init__(self):
        for name in ("tp", "tn", "fp", "fn"):
            v = getattr(self, name)
            if int(v) != v or v < 0:
                raise ValueError(f"{name} must be a non-negative integer, got {v!r}")
            object.__setattr__(self, name, int(v))

    @property
    def n(self):
        return self.tp + self.tn + self.fp + self.fn

    def scaled(self, k):
        return ConfusionCounts(self.tp * k, self.tn * k, self.fp * k, self.fn * k)


@dataclass(frozen=True)
class ClassMetrics:
    accuracy: float
    sensitivity: float
    specificity: float
    fpr: float
    fnr: float


def confusion(predicted, truth):
    """Count the four cells of a binary outcome table (1 = positive)."""
    p = np.asarray(predicted).astype(bool).ravel()
    t = np.asarray(truth).astype(bool).ravel()
    if p.shape != t.shape:
        raise ValueError(f"length mismatch: {p.size} predictions vs {t.size} labels")
    if p.size == 0:
        raise ValueError("need at least one sample")
    return ConfusionCounts(
        tp=int(np.sum(p & t)),
        tn=int(np.sum(~p & ~t)),
        fp=int(np.sum(p & ~t)),
        fn=int(np.sum(~p & t)),
    )


def _check(c):
    if c.n < 1:
        raise ValueError("confusion table is empty")


def _plogp(p):
    return p * math.log(p) if p > 0 else 0.0


def entropy_truth_marginal(c):
    """Entropy of the split (TP+FN, TN+FP), in nats."""
    _check(c)
    n = c.n
    return -_plogp((c.tp + c.fn) / n) - _plogp((c.tn + c.fp) / n)


def entropy_prediction_marginal(c):
    """Entropy of the split (TP+FP, TN+FN), in nats."""
    _check(c)
    n = c.n
    return -_plogp((c.tp + c.fp) / n) - _plogp((c.tn + c.fn) / n)


def joint_entropy(c):
    """Entropy of the four-cell distribution (TP, TN, FP, FN)/N."""
    _check(c)
    n = c.n
    return -sum(_plogp(v / n) for v in (c.tp, c.tn, c.fp, c.fn))


def mutual_information(c):
    """Mutual information between predicted and true labels, in nats.

    Each cell contributes ``-p_cell * log(p_row * p_col)`` on top of the
    negated joint entropy, where the row margin is the predicted side and
    the column margin the true side of that cell.
    """
    _check(c)
    n = c.n
    tp, tn, fp, fn = c.tp / n, c.tn / n, c.fp / n, c.fn / n
    pred_pos, pred_neg = (c.tp + c.fp) / n, (c.tn + c.fn) / n
    true_pos, true_neg = (c.tp + c.fn) / n, (c.tn + c.fp) / n

    def term(p_cell, p_row, p_col):
        return p_cell * math.log(p_row * p_col) if p_cell > 0 else 0.0

    return (
        -joint_entropy(c)
        - term(tp, pred_pos, true_pos)
        - term(fn, true_pos, pred_neg)
        - term(fp, pred_pos, true_neg)
        - term(tn, pred_neg, true_neg)
    )


def normalized_mi(c, denominator="truth"):
    """Mutual information divided by a marginal entropy, clipped to [0, 1].

    Parameters
    ----------
    c : ConfusionCounts
    denominator : {"truth", "prediction"}
        ``"truth"`` divides by the entropy of the (TP+FN, TN+FP) split,
        ``"prediction"`` by that of the (TP+FP, TN+FN) split.

    Returns 0 and emits :class:`DegenerateEntropyWarning` when the denominator
    is zero.
    """
    if denominator == "truth":
        h = entropy_truth_marginal(c)
    elif denominator == "prediction":
        h = entropy_prediction_marginal(c)
    else:
        raise ValueError(f"denominator must be 'truth' or 'prediction', not {denominator!r}")
    if h <= 0.0:
        msg = f"zero {denominator} entropy for {c}; weight set to 0"
        log.warning(msg)
        warnings.warn(msg, DegenerateEntropyWarning, stacklevel=2)
        return 0.0
    # A label-preserving or label-swapping table is a noiseless channel.
    if (c.fp == 0 and c.fn == 0) or (c.tp == 0 and c.tn == 0):
        return 1.0
    return min(1.0, max(0.0, mutual_information(c) / h))


def class_metrics(c):
    """Accuracy, sensitivity, specificity and the two error rates.

    Raises
    ------
    ValueError
        If the table has no positive (TP+FN) or no negative (TN+FP) samples.
    """
    pos = c.tp + c.fn
    neg = c.tn + c.fp
    if pos < 1:
        raise ValueError("no positive samples (TP + FN = 0); sensitivity undefined")
    if neg < 1:
        raise ValueError("no negative samples (TN + FP = 0); specificity undefined")
    sens = c.tp / pos
    spec = c.tn / neg
    return ClassMetrics(
        accuracy=(c.tp + c.tn) / c.n,
        sensitivity=sens,
        specificity=spec,
        fpr=1.0 - spec,
        fnr=1.0 - sens,
    )
