"""Input validation helpers shared by functions and estimators."""

from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array


def check_labels(labels) -> np.ndarray:
    """Return labels as an int array, requiring every entry to be +1 or -1."""
    y = np.asarray(labels)
    if y.ndim != 1:
        raise ValueError(f"labels must be one-dimensional, got shape {y.shape}")
    if y.size == 0:
        raise ValueError("labels are empty")
    if not np.all((y == 1) | (y == -1)):
        bad = np.unique(y[(y != 1) & (y != -1)])[:5]
        raise ValueError(f"labels must be +1 or -1, found {bad.tolist()}")
    return y.astype(int)


def check_square(K, name: str = "K", symmetric_tol: float | None = 1e-9) -> np.ndarray:
    """Validate a finite square matrix, optionally requiring symmetry."""
    K = check_array(np.asarray(K), dtype=float, ensure_2d=True, ensure_min_samples=1)
    if K.shape[0] != K.shape[1]:
        raise ValueError(f"{name} must be square, got shape {K.shape}")
    if symmetric_tol is not None and not np.allclose(K, K.T, rtol=0, atol=symmetric_tol):
        raise ValueError(f"{name} is not symmetric within {symmetric_tol}")
    return K


def symmetrize(A) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    return (A + A.T) / 2


def check_features(X, num_features: int | None = None) -> np.ndarray:
    X = check_array(X, dtype=float)
    if num_features is not None and X.shape[1] != num_features:
        raise ValueError(f"expected {num_features} features, got {X.shape[1]}")
    return X
