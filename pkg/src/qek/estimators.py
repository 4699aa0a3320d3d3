"""scikit-learn compatible wrappers around the functional API.

>>> from qek.estimators import QEKClassifier
>>> clf = QEKClassifier(num_qubits=3, num_layers=2, iterations=20).fit(X, y)
>>> clf.score(X_test, y_test)
"""

from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted, check_X_y

from . import svm as _svm
from ._validation import check_features, check_square
from .alignment import TrainConfig, target_alignment, train_alignment
from .embedding import AnsatzShape, random_parameters
from .kernel import ShotConfig, cross_kernel_matrix, kernel_matrix, rbf_kernel_matrix
from .postprocess import apply_strategy
from .simulator import NoiseModel


def _binary_targets(y):
    classes = np.unique(y)
    if len(classes) != 2:
        raise ValueError(f"binary classification needs exactly two classes, got {len(classes)}")
    return classes, np.where(y == classes[1], 1, -1)


class QuantumEmbeddingKernel(TransformerMixin, BaseEstimator):
    """Trainable quantum embedding kernel.

    ``fit`` optimizes the variational parameters by kernel-target
    alignment; ``transform`` maps samples to their kernel values against
    the training points. With ``base_survival`` set, kernel values come
    from the noisy device simulation; with ``shots`` set, they are
    sampled estimates.
    """

    def __init__(self, num_qubits=5, num_layers=8, iterations=500, learning_rate=0.2,
                 batch_size=4, fd_step=math.pi / 100, rescale=False, base_survival=None,
                 shots=None, random_state=0, init_params=None, threads=1):
        self.num_qubits = num_qubits
        self.num_layers = num_layers
        self.iterations = iterations
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.fd_step = fd_step
        self.rescale = rescale
        self.base_survival = base_survival
        self.shots = shots
        self.random_state = random_state
        self.init_params = init_params
        self.threads = threads

    @property
    def shape_(self) -> AnsatzShape:
        return AnsatzShape(self.num_qubits, self.num_layers)

    def _noise(self):
        return None if self.base_survival is None else NoiseModel(self.base_survival)

    def _shots(self, measure_diagonal=False):
        if self.shots is None:
            return None
        return ShotConfig(self.shots, int(self.random_state or 0), measure_diagonal)

    def fit(self, X, y=None):
        X = check_features(X, 2)
        shape = self.shape_
        if self.init_params is None:
            theta = random_parameters(shape, np.random.default_rng(self.random_state))
        else:
            theta = np.asarray(self.init_params, dtype=float)
        self.history_ = None
        if y is not None and self.iterations > 0:
            _, yy = _binary_targets(np.asarray(y))
            cfg = TrainConfig(self.learning_rate, self.batch_size, self.iterations, self.fd_step,
                              int(self.random_state or 0), self.rescale)
            theta, self.history_ = train_alignment(X, yy, theta, shape, cfg)
        self.theta_ = theta
        self.X_fit_ = X
        return self

    def kernel(self, X, Y=None, measure_diagonal=None):
        """Kernel matrix of ``X`` (a KernelMatrix), or the cross matrix against ``Y``."""
        check_is_fitted(self, "theta_")
        X = check_features(X, 2)
        if Y is None:
            return kernel_matrix(X, self.theta_, self.shape_, self._noise(),
                                 self._shots(bool(measure_diagonal)), measure_diagonal,
                                 threads=self.threads)
        Y = check_features(Y, 2)
        return cross_kernel_matrix(X, Y, self.theta_, self.shape_, self._noise(), self._shots(),
                                   threads=self.threads)

    def transform(self, X):
        check_is_fitted(self, "theta_")
        return self.kernel(X, self.X_fit_)

    def score(self, X, y):
        """Kernel-target alignment on ``(X, y)``."""
        _, yy = _binary_targets(np.asarray(y))
        return target_alignment(self.kernel(X), yy, self.rescale)


class KernelPostProcessor(TransformerMixin, BaseEstimator):
    """Apply a mitigation/regularization strategy to a square kernel matrix."""

    def __init__(self, strategy="Id-Id-Id", num_qubits=5, n_mean=None):
        self.strategy = strategy
        self.num_qubits = num_qubits
        self.n_mean = n_mean

    def fit(self, K, y=None):
        return self

    def transform(self, K):
        return np.asarray(apply_strategy(K, self.strategy, self.num_qubits, self.n_mean))


class SMOClassifier(ClassifierMixin, BaseEstimator):
    """Soft-margin SVM solved by SMO.

    ``kernel`` is ``"precomputed"`` (fit on a Gram matrix, predict on a
    test-by-train matrix), ``"rbf"`` with bandwidth ``sigma``, or a
    callable ``k(A, B) -> matrix``.
    """

    def __init__(self, C=1.0, kernel="precomputed", sigma=1.0, tol=1e-3, max_passes=100_000):
        self.C = C
        self.kernel = kernel
        self.sigma = sigma
        self.tol = tol
        self.max_passes = max_passes

    def _gram(self, A, B):
        if self.kernel == "rbf":
            return rbf_kernel_matrix(A, B, self.sigma)
        if callable(self.kernel):
            return np.asarray(self.kernel(A, B), dtype=float)
        raise ValueError(f"unknown kernel {self.kernel!r}")

    def fit(self, X, y):
        y = np.asarray(y)
        self.classes_, yy = _binary_targets(y)
        if self.kernel == "precomputed":
            K = check_square(X, "precomputed kernel")
            if len(y) != K.shape[0]:
                raise ValueError("kernel size and label count differ")
        else:
            X, y = check_X_y(X, y)
            self.X_fit_ = X
            K = self._gram(X, X)
        self.model_ = _svm.fit(K, yy, self.C, self.tol, self.max_passes)
        return self

    def decision_function(self, X):
        check_is_fitted(self, "model_")
        K = np.asarray(X, dtype=float) if self.kernel == "precomputed" else self._gram(np.asarray(X, dtype=float), self.X_fit_)
        return self.model_.decision_function(K)

    def predict(self, X):
        f = self.decision_function(X)
        return np.where(f >= 0, self.classes_[1], self.classes_[0])


class QEKClassifier(ClassifierMixin, BaseEstimator):
    """Quantum-kernel SVM: alignment training, post-processing, SMO."""

    def __init__(self, num_qubits=5, num_layers=8, iterations=500, learning_rate=0.2,
                 batch_size=4, fd_step=math.pi / 100, rescale=False, base_survival=None,
                 shots=None, strategy="Id-Id-Id", C=1.0, random_state=0, init_params=None,
                 threads=1):
        self.num_qubits = num_qubits
        self.num_layers = num_layers
        self.iterations = iterations
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.fd_step = fd_step
        self.rescale = rescale
        self.base_survival = base_survival
        self.shots = shots
        self.strategy = strategy
        self.C = C
        self.random_state = random_state
        self.init_params = init_params
        self.threads = threads

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        self.classes_, yy = _binary_targets(y)
        self.kernel_ = QuantumEmbeddingKernel(
            self.num_qubits, self.num_layers, self.iterations, self.learning_rate,
            self.batch_size, self.fd_step, self.rescale, self.base_survival, self.shots,
            self.random_state, self.init_params, self.threads,
        ).fit(X, yy)
        needs_diag = self.strategy.split("-")[1] != "Id"
        K = self.kernel_.kernel(X, measure_diagonal=needs_diag)
        self.train_kernel_ = apply_strategy(K, self.strategy, self.num_qubits)
        self.svm_ = SMOClassifier(self.C).fit(np.asarray(self.train_kernel_), yy)
        return self

    @property
    def theta_(self):
        return self.kernel_.theta_

    def decision_function(self, X):
        check_is_fitted(self, "svm_")
        return self.svm_.decision_function(np.asarray(self.kernel_.transform(X)))

    def predict(self, X):
        f = self.decision_function(X)
        return np.where(f >= 0, self.classes_[1], self.classes_[0])
