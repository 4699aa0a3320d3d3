import numpy as np
import pytest
from sklearn.svm import SVC

from qek import svm
from qek.exceptions import IndefiniteKernel, NonConvergence
from qek.kernel import rbf_kernel_matrix

from oracles import brute_force_dual


def _instance(seed, n):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 2))
    y = rng.permutation(np.r_[np.ones(n // 2), -np.ones(n - n // 2)])
    K = rbf_kernel_matrix(X, X, float(rng.uniform(0.5, 2)))
    return K, y, float(rng.choice([0.3, 1.0, 10.0]))


def test_two_point_identity_kernel():
    for C in (0.4, 1.0, 3.0):
        m = svm.fit(np.eye(2), [1, -1], C=C, tol=1e-10)
        assert np.allclose(m.alpha, min(1.0, C))
        assert m.b == pytest.approx(0.0, abs=1e-9)


def test_separable_rbf_toy():
    X = np.array([[0, 0], [0.2, 0.1], [3, 3], [3.1, 2.8]])
    y = np.array([1, 1, -1, -1])
    K = rbf_kernel_matrix(X, X, 1.0)
    m = svm.fit(K, y, C=10)
    assert svm.accuracy(svm.predict(m, K), y) == 1.0


def test_degenerate_model_predicts_sign_of_b():
    m = svm.SVMModel(np.zeros(3), -0.5, np.array([1, -1, 1]), 1.0)
    assert np.array_equal(m.predict(np.ones((4, 3))), [-1] * 4)
    m.b = 0.0
    assert np.array_equal(m.predict(np.ones((2, 3))), [1, 1])


def test_accuracy_examples():
    assert svm.accuracy([1, -1], [1, -1]) == 1.0
    assert svm.accuracy([1, -1], [-1, 1]) == 0.0
    assert svm.accuracy([1, 1, -1, -1], [1, -1, -1, -1]) == 0.75
    with pytest.raises(ValueError):
        svm.accuracy([1], [1, 1])
    with pytest.raises(ValueError):
        svm.accuracy([], [])


@pytest.mark.parametrize("seed", range(20))
def test_matches_brute_force_oracle(seed):
    n = 3 + seed % 4
    K, y, C = _instance(seed, n)
    obj, alpha_ref, b_ref = brute_force_dual(K, y, C)
    m = svm.fit(K, y, C=C, tol=1e-8)
    assert svm.dual_objective(m.alpha, K, y) == pytest.approx(obj, abs=1e-4)
    if b_ref is not None:
        f_ref = K @ (alpha_ref * y) + b_ref
        assert np.array_equal(np.sign(m.decision_function(K)), np.sign(f_ref))


@pytest.mark.parametrize("seed", range(10))
def test_matches_sklearn(seed):
    rng = np.random.default_rng(100 + seed)
    X = rng.normal(size=(25, 2))
    y = np.where(X[:, 0] * X[:, 1] > 0, 1, -1)
    if len(set(y)) < 2:
        y[0] = -y[0]
    K = rbf_kernel_matrix(X, X, 1.0)
    m = svm.fit(K, y, C=1.0, tol=1e-6)
    ref = SVC(C=1.0, kernel="precomputed", tol=1e-6).fit(K, y)
    assert np.allclose(m.decision_function(K), ref.decision_function(K), atol=1e-3)


@pytest.mark.parametrize("c", [0.1, 3.0])
def test_scale_robustness(c):
    K, y, C = _instance(4, 6)
    m = svm.fit(K, y, C=C, tol=1e-9)
    ms = svm.fit(c * K, y, C=C / c, tol=1e-9)
    assert np.allclose(ms.alpha, m.alpha / c, atol=1e-6)
    assert np.array_equal(ms.predict(c * K), m.predict(K))


def test_kkt_conditions_hold():
    K, y, C = _instance(3, 6)
    tol = 1e-3
    m = svm.fit(K, y, C=C, tol=tol)
    yf = y * m.decision_function(K)
    for a, v in zip(m.alpha, yf):
        if a < 1e-8:
            assert v >= 1 - tol
        elif a > C - 1e-8:
            assert v <= 1 + tol
        else:
            assert abs(v - 1) <= tol
    assert abs(m.alpha @ y) < 1e-9
    assert np.all((m.alpha >= 0) & (m.alpha <= C))


def test_rejections():
    with pytest.raises(IndefiniteKernel):
        svm.fit(np.array([[1.0, 2.0], [2.0, 1.0]]), [1, -1])
    with pytest.raises(ValueError):
        svm.fit(np.eye(2), [1, 1])
    with pytest.raises(ValueError):
        svm.fit(np.eye(2), [1, -1], C=0)
    with pytest.raises(ValueError):
        svm.fit(np.eye(3), [1, -1])
    m = svm.fit(np.eye(2), [1, -1])
    with pytest.raises(ValueError):
        m.predict(np.ones((1, 3)))


def test_non_convergence():
    K, y, C = _instance(1, 6)
    with pytest.raises(NonConvergence):
        svm.fit(K, y, C=C, tol=1e-12, max_passes=1)


def test_model_round_trip(tmp_path):
    K, y, C = _instance(2, 6)
    m = svm.fit(K, y, C=C)
    path = tmp_path / "model.json"
    m.save(path)
    m2 = svm.SVMModel.load(path)
    assert np.array_equal(m2.alpha, m.alpha) and m2.b == m.b
    assert np.array_equal(m2.predict(K), m.predict(K))
    assert set(m.to_dict()) == {"alpha", "b", "support_indices", "labels", "C"}
