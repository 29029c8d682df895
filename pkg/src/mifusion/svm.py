"""Soft-margin SVM with the degree-2 polynomial kernel ``(x.w + b0)**2``.

Binary problems are solved in the dual by sequential minimal optimisation.
The first index of each working pair is the maximal KKT violator; the
second is the violating partner with the largest second-order gain. Multiclass prediction
trains one machine per class against the rest and maps each decision value
to (0, 1) with a per-class logistic calibration.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit

from . import serialization
from .dataset import N_CLASSES, TRAINABLE_CLASSES
from .errors import DataError
from .preprocessing import Standardizer

log = logging.getLogger(__name__)

_TAU = 1e-12
#: Points with a multiplier above this are kept as support vectors.
SV_THRESHOLD = 1e-12


@dataclass(frozen=True)
class PolyKernel:
    b0: float = 1.0
    degree: int = 2

    def __post_init__(self):
        if self.degree != 2:
            raise ValueError("only the degree-2 polynomial kernel is supported")

    def gram(self, X, Y):
        """Kernel matrix between the rows of ``X`` and ``Y``."""
        return (np.atleast_2d(X) @ np.atleast_2d(Y).T + self.b0) ** 2


def kernel_eval(k, x, w):
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    if x.shape != w.shape or x.ndim != 1:
        raise ValueError(f"kernel arguments must be vectors of equal length, got {x.shape} and {w.shape}")
    return float((x @ w + k.b0) ** 2)


@dataclass(frozen=True)
class SmoConfig:
    C: float = 10.0
    kkt_tolerance: float = 1e-3
    max_passes: int = 1000  # iteration budget is max_passes * n_samples
    seed: int = 0

    def __post_init__(self):
        if self.C <= 0 or self.kkt_tolerance <= 0 or self.max_passes <= 0:
            raise ValueError("C, kkt_tolerance and max_passes must be positive")


@dataclass(frozen=True, eq=False)
class SvmBinaryModel:
    support_vectors: np.ndarray
    dual_coefficients: np.ndarray  # alpha_i * y_i
    bias: float
    kernel: PolyKernel
    converged: bool = True
    kkt_violations: int = 0
    n_iter: int = 0
    dual_objective: np.ndarray = field(default=None, repr=False)

    def decision(self, Xs, chunk=4096):
        """Decision values ``sum_i alpha_i y_i K(sv_i, x) + bias`` for scaled inputs."""
        Xs = np.asarray(Xs, dtype=float)
        X2 = np.atleast_2d(Xs)
        out = np.empty(len(X2))
        for s in range(0, len(X2), chunk):
            out[s:s + chunk] = self.kernel.gram(X2[s:s + chunk], self.support_vectors) @ self.dual_coefficients
        out += self.bias
        return out[0] if Xs.ndim == 1 else out


def _rho(G, y, alpha, C):
    ub, lb = np.inf, -np.inf
    yG = y * G
    upper = alpha >= C
    lower = alpha <= 0
    free = ~upper & ~lower
    if free.any():
        return float(np.mean(yG[free]))
    # at upper bound: y=-1 bounds above, y=+1 bounds below; reverse at lower bound
    ub_mask = (upper & (y < 0)) | (lower & (y > 0))
    lb_mask = (upper & (y > 0)) | (lower & (y < 0))
    if ub_mask.any():
        ub = yG[ub_mask].min()
    if lb_mask.any():
        lb = yG[lb_mask].max()
    if not np.isfinite(ub):
        return float(lb)
    if not np.isfinite(lb):
        return float(ub)
    return float((ub + lb) / 2)


def smo_solve(K, y, C, tol, max_iter, seed=0):
    """Solve ``min 1/2 a'Qa - sum(a)`` s.t. ``0 <= a <= C``, ``y'a = 0``.

    Parameters
    ----------
    K : ndarray, shape (n, n)
        Kernel matrix.
    y : ndarray of +-1
    C, tol : float
        Box bound and stopping gap on the maximal KKT violation.
    max_iter : int
    seed : int
        Randomises the index order, which breaks ties in pair selection.

    Returns
    -------
    alpha : ndarray
    rho : float
        Decision values are ``(alpha * y) @ K - rho``.
    info : dict
        ``converged``, ``n_iter``, ``kkt_violations``, ``dual_objective``
        (the maximisation-form objective after every update).
    """
    n = len(y)
    perm = np.random.default_rng(seed).permutation(n)
    y = np.asarray(y, dtype=float)[perm]
    K = np.ascontiguousarray(K[np.ix_(perm, perm)])
    KD = np.diag(K).copy()
    alpha = np.zeros(n)
    # score_t = -y_t * grad_t, the per-point KKT quantity
    score = y.copy()
    pos = y > 0
    up = pos.copy()  # alpha can move up along y
    low = ~pos
    objective = [0.0]

    def refresh(t):
        up[t] = alpha[t] < C if pos[t] else alpha[t] > 0
        low[t] = alpha[t] > 0 if pos[t] else alpha[t] < C

    converged = False
    it = 0
    while True:
        i = int(np.argmax(np.where(up, score, -np.inf)))
        m = score[i]
        M = np.min(np.where(low, score, np.inf))
        if m - M < tol:
            converged = True
            break
        if it >= max_iter:
            break
        it += 1
        # second index: largest guaranteed decrease among violating partners
        b = m - score
        quad = KD[i] + KD - 2.0 * K[i]
        gain = np.where(low & (b > 0), b * b / np.where(quad > 0, quad, _TAU), -np.inf)
        j = int(np.argmax(gain))

        ai, aj = alpha[i], alpha[j]
        Gi, Gj = -y[i] * score[i], -y[j] * score[j]
        quad = KD[i] + KD[j] - 2.0 * K[i, j]
        if quad <= 0:
            quad = _TAU
        if y[i] != y[j]:
            delta = (-Gi - Gj) / quad
            diff = ai - aj
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j], alpha[i] = 0.0, diff
            elif alpha[i] < 0:
                alpha[i], alpha[j] = 0.0, -diff
            if diff > 0:
                if alpha[i] > C:
                    alpha[i], alpha[j] = C, C - diff
            elif alpha[j] > C:
                alpha[j], alpha[i] = C, C + diff
        else:
            delta = (Gi - Gj) / quad
            total = ai + aj
            alpha[i] -= delta
            alpha[j] += delta
            if total > C:
                if alpha[i] > C:
                    alpha[i], alpha[j] = C, total - C
            elif alpha[j] < 0:
                alpha[j], alpha[i] = 0.0, total
            if total > C:
                if alpha[j] > C:
                    alpha[j], alpha[i] = C, total - C
            elif alpha[i] < 0:
                alpha[i], alpha[j] = 0.0, total

        score -= K[i] * (y[i] * (alpha[i] - ai)) + K[j] * (y[j] * (alpha[j] - aj))
        refresh(i)
        refresh(j)
        # dual objective sum(a) - 1/2 a'Qa, with Qa = grad + 1
        objective.append(0.5 * float(alpha @ (1.0 + y * score)))

    violations = 0 if converged else int(np.sum((up & (score - M > tol)) | (low & (m - score > tol))))
    rho = _rho(-y * score, y, alpha, C)

    out = np.empty(n)
    out[perm] = alpha
    return out, rho, {
        "converged": converged,
        "n_iter": it,
        "kkt_violations": violations,
        "dual_objective": np.array(objective),
    }


def svm_train_binary(points, labels, kernel=PolyKernel(), cfg=SmoConfig(), K=None):
    """Train one soft-margin machine on already-scaled points.

    Parameters
    ----------
    points : ndarray, shape (n, d)
    labels : array_like of +-1
    kernel : PolyKernel
    cfg : SmoConfig
    K : ndarray, optional
        Precomputed kernel matrix over ``points``.
    """
    X = np.asarray(points, dtype=float)
    y = np.asarray(labels, dtype=float)
    if not np.all(np.isfinite(X)):
        raise DataError("points must be finite")
    if not (np.any(y == 1) and np.any(y == -1)) or not np.all(np.abs(y) == 1):
        raise DataError("labels must be +-1 with both classes present")
    if K is None:
        K = kernel.gram(X, X)
    alpha, rho, info = smo_solve(K, y, cfg.C, cfg.kkt_tolerance, cfg.max_passes * len(y), cfg.seed)
    if not info["converged"]:
        log.warning("SMO hit the iteration limit with %d KKT violations", info["kkt_violations"])
    sv = alpha > SV_THRESHOLD
    return SvmBinaryModel(
        support_vectors=X[sv].copy(),
        dual_coefficients=(alpha * y)[sv],
        bias=-rho,
        kernel=kernel,
        converged=info["converged"],
        kkt_violations=info["kkt_violations"],
        n_iter=info["n_iter"],
        dual_objective=info["dual_objective"],
    )


def fit_logistic_calibration(decision, positive):
    """Platt-style fit of ``P(positive) = expit(slope * decision + intercept)``.

    Uses Platt's smoothed targets so separable data yields a finite slope.
    """
    f = np.asarray(decision, dtype=float)
    t = np.asarray(positive, dtype=bool)
    n_pos, n_neg = int(t.sum()), int((~t).sum())
    target = np.where(t, (n_pos + 1.0) / (n_pos + 2.0), 1.0 / (n_neg + 2.0))

    def nll(params):
        a, b = params
        z = a * f + b
        # log(1 + e^z) - target * z, computed stably
        loss = np.logaddexp(0.0, z) - target * z
        p = expit(z)
        r = p - target
        return float(loss.sum()), np.array([float(r @ f), float(r.sum())])

    x0 = np.array([1.0, np.log((n_neg + 1.0) / (n_pos + 1.0)) * -1.0])
    res = minimize(nll, x0, jac=True, method="BFGS")
    return float(res.x[0]), float(res.x[1])


@dataclass(frozen=True, eq=False)
class SvmOvaModel:
    machines: tuple
    calibration: np.ndarray  # (n_classes, 2): slope, intercept
    scaler: Standardizer

    def decision(self, x):
        Xs = self.scaler.transform(np.asarray(x, dtype=float))
        return np.stack([m.decision(Xs) for m in self.machines], axis=-1)

    def to_text(self):
        k = self.machines[0].kernel
        scalars = {"n_classes": len(self.machines), "b0": float(k.b0), "degree": k.degree}
        arrays = {"scaler_mean": self.scaler.mean, "scaler_std": self.scaler.std,
                  "calibration": self.calibration}
        for c, m in enumerate(self.machines):
            scalars[f"bias_{c}"] = float(m.bias)
            scalars[f"converged_{c}"] = bool(m.converged)
            scalars[f"kkt_violations_{c}"] = int(m.kkt_violations)
            scalars[f"n_iter_{c}"] = int(m.n_iter)
            arrays[f"support_vectors_{c}"] = m.support_vectors
            arrays[f"dual_coefficients_{c}"] = m.dual_coefficients
        return serialization.dumps("svm", scalars, arrays)

    @classmethod
    def from_text(cls, text):
        sc, arr = serialization.loads(text, "svm")
        kernel = PolyKernel(sc["b0"], sc["degree"])
        machines = tuple(
            SvmBinaryModel(
                arr[f"support_vectors_{c}"], arr[f"dual_coefficients_{c}"], sc[f"bias_{c}"], kernel,
                sc[f"converged_{c}"], sc[f"kkt_violations_{c}"], sc[f"n_iter_{c}"],
            )
            for c in range(sc["n_classes"])
        )
        return cls(machines, arr["calibration"], Standardizer(arr["scaler_mean"], arr["scaler_std"]))


def svm_train_ova(train, kernel=PolyKernel(), cfg=SmoConfig()):
    """One machine per trainable class against the rest, plus calibration.

    Parameters
    ----------
    train : Dataset or tuple (X, labels)
        Labels are indices into :data:`TRAINABLE_CLASSES`.
    """
    if hasattr(train, "features"):
        X, y = train.features, train.class_index()
    else:
        X, y = train
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    for c in range(N_CLASSES):
        if not np.any(y == c):
            raise DataError(f"class {TRAINABLE_CLASSES[c].name} is absent from the training set")
    scaler = Standardizer.fit(X)
    Xs = scaler.transform(X)
    K = kernel.gram(Xs, Xs)
    machines, calib = [], []
    for c in range(N_CLASSES):
        yc = np.where(y == c, 1.0, -1.0)
        m = svm_train_binary(Xs, yc, kernel, cfg, K=K)
        machines.append(m)
        calib.append(fit_logistic_calibration(m.decision(Xs), yc > 0))
    return SvmOvaModel(tuple(machines), np.array(calib), scaler)


def svm_scores(model, x):
    """Calibrated per-class confidences in (0, 1) for one row or a batch."""
    d = model.decision(x)
    return expit(model.calibration[:, 0] * d + model.calibration[:, 1])
