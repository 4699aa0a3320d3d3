"""Binary soft-margin SVM on a precomputed kernel matrix, solved by SMO.

The dual

    min_a  1/2 a^T Q a - sum(a),   Q_ij = y_i y_j K_ij,
    s.t.   0 <= a_i <= C,  y^T a = 0

is solved by sequential minimal optimization with the second-order
working-set selection of Fan, Chen & Lin (2005). The decision function is
``f(x) = sum_i a_i y_i k(x_i, x) + b``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from ._validation import check_labels, check_square
from .exceptions import IndefiniteKernel, NonConvergence

_TAU = 1e-12
SUPPORT_TOL = 1e-8


@dataclass
class SVMModel:
    alpha: np.ndarray
    b: float
    labels: np.ndarray
    C: float

    @property
    def support_indices(self) -> np.ndarray:
        return np.flatnonzero(self.alpha > SUPPORT_TOL)

    def decision_function(self, K_cross) -> np.ndarray:
        K_cross = np.atleast_2d(np.asarray(K_cross, dtype=float))
        if K_cross.shape[1] != len(self.alpha):
            raise ValueError(
                f"cross kernel has {K_cross.shape[1]} columns, model has {len(self.alpha)} "
                "training points"
            )
        return K_cross @ (self.alpha * self.labels) + self.b

    def predict(self, K_cross) -> np.ndarray:
        return predict(self, K_cross)

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha.tolist(),
            "b": float(self.b),
            "support_indices": self.support_indices.tolist(),
            "labels": self.labels.astype(int).tolist(),
            "C": float(self.C),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SVMModel":
        return cls(np.asarray(d["alpha"], dtype=float), float(d["b"]),
                   check_labels(d["labels"]), float(d["C"]))

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    @classmethod
    def load(cls, path) -> "SVMModel":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def dual_objective(alpha, K, labels) -> float:
    """Dual objective ``sum(a) - 1/2 a^T Q a`` (to be maximized)."""
    ay = alpha * labels
    return float(np.sum(alpha) - 0.5 * ay @ K @ ay)


def fit(K_train, labels, C: float = 1.0, tol: float = 1e-3, max_passes: int = 100_000,
        psd_tol: float = 1e-8) -> SVMModel:
    """Train the dual SVM on a symmetric PSD kernel matrix."""
    K = check_square(K_train, "K_train")
    y = check_labels(labels).astype(float)
    n = len(y)
    if n != K.shape[0]:
        raise ValueError(f"{n} labels for a {K.shape[0]}-point kernel")
    if not C > 0:
        raise ValueError("C must be positive")
    if len(np.unique(y)) < 2:
        raise ValueError("training labels must contain both classes")
    min_eig = np.linalg.eigvalsh((K + K.T) / 2)[0]
    if min_eig < -psd_tol:
        raise IndefiniteKernel(
            f"kernel matrix has eigenvalue {min_eig:.3g}; regularize it before fitting"
        )

    Q = np.outer(y, y) * K
    alpha = np.zeros(n)
    grad = -np.ones(n)
    diag = np.diag(K)

    for _ in range(max_passes):
        yg = -y * grad
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        i = int(np.flatnonzero(up)[np.argmax(yg[up])])
        m_max = yg[i]
        m_min = np.min(yg[low])
        if m_max - m_min < tol:
            break
        cand = low & (yg < m_max)
        idx = np.flatnonzero(cand)
        bgap = m_max - yg[idx]
        a = diag[i] + diag[idx] - 2 * K[i, idx]
        a = np.where(a > 0, a, _TAU)
        j = int(idx[np.argmin(-(bgap**2) / a)])

        # two-variable subproblem (libsvm update)
        ai_old, aj_old = alpha[i], alpha[j]
        quad = max(diag[i] + diag[j] - 2 * K[i, j], _TAU)
        if y[i] != y[j]:
            delta = (-grad[i] - grad[j]) / quad
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j] = 0
                    alpha[i] = diff
            elif alpha[i] < 0:
                alpha[i] = 0
                alpha[j] = -diff
            if diff > 0:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = C - diff
            elif alpha[j] > C:
                alpha[j] = C
                alpha[i] = C + diff
        else:
            delta = (grad[i] - grad[j]) / quad
            total = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if total > C:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = total - C
            elif alpha[j] < 0:
                alpha[j] = 0
                alpha[i] = total
            if total > C:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = total - C
            elif alpha[i] < 0:
                alpha[i] = 0
                alpha[j] = total
        grad += Q[:, i] * (alpha[i] - ai_old) + Q[:, j] * (alpha[j] - aj_old)
    else:
        raise NonConvergence(f"SMO did not reach KKT tolerance {tol} in {max_passes} steps")

    alpha = np.clip(alpha, 0, C)
    return SVMModel(alpha, _intercept(alpha, grad, y, C), y.astype(int), float(C))


def _intercept(alpha, grad, y, C) -> float:
    yg = y * grad
    free = (alpha > SUPPORT_TOL) & (alpha < C - SUPPORT_TOL)
    if np.any(free):
        rho = float(np.mean(yg[free]))
    else:
        at_upper = alpha >= C - SUPPORT_TOL
        at_lower = ~at_upper
        ub = np.inf
        lb = -np.inf
        # rho bounds from the KKT conditions at the box edges
        for sel, upper_side in ((at_upper, True), (at_lower, False)):
            for t in np.flatnonzero(sel):
                if (y[t] > 0) == upper_side:
                    lb = max(lb, yg[t])
                else:
                    ub = min(ub, yg[t])
        if np.isfinite(ub) and np.isfinite(lb):
            rho = (ub + lb) / 2
        else:
            rho = lb if np.isfinite(lb) else ub
    return -rho


def predict(model: SVMModel, K_cross) -> np.ndarray:
    """Class labels; a decision value of exactly zero maps to +1."""
    f = model.decision_function(K_cross)
    return np.where(f >= 0, 1, -1)


def accuracy(predicted, true) -> float:
    predicted, true = np.asarray(predicted), np.asarray(true)
    if predicted.shape != true.shape:
        raise ValueError("prediction and truth must have equal length")
    if predicted.size == 0:
        raise ValueError("accuracy of an empty prediction is undefined")
    return float(np.mean(predicted == true))
