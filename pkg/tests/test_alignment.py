import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qek.alignment import (TrainConfig, alignment_gradient, batch_kernels,
                           class_states, full_alignment, hs_class_distance, ideal_kernel,
                           matrix_alignment, params_hash, polarity, stratified_batch,
                           target_alignment, train_alignment)
from qek.data import gen_checkerboard
from qek.embedding import AnsatzShape, random_parameters
from qek.exceptions import TrainingError
from qek.kernel import ShotConfig, kernel_matrix
from qek.simulator import NoiseModel

balanced_labels = st.integers(1, 6).flatmap(
    lambda k: st.permutations([1] * k + [-1] * k).map(np.array))


def _psd(rng, n):
    A = rng.normal(size=(n, n))
    return A @ A.T


# ---------------------------------------------------------------- ideal kernel / alignment


def test_ideal_kernel_examples():
    assert np.array_equal(ideal_kernel([1, 1]), [[1, 1], [1, 1]])
    assert np.array_equal(ideal_kernel([1, -1]), [[1, -1], [-1, 1]])
    y = np.array([1, -1, -1, 1, 1])
    w = np.linalg.eigvalsh(ideal_kernel(y))
    assert np.allclose(w, [0, 0, 0, 0, 5], atol=1e-12)
    with pytest.raises(ValueError):
        ideal_kernel([1, 0])


def test_matrix_alignment_examples():
    B = np.array([[2.0, 0.3], [0.3, 1.0]])
    assert matrix_alignment(B, B) == pytest.approx(1.0)
    assert matrix_alignment(B, -B) == pytest.approx(-1.0)
    assert matrix_alignment(np.eye(2), np.ones((2, 2))) == pytest.approx(1 / math.sqrt(2))
    with pytest.raises(ValueError):
        matrix_alignment(np.zeros((2, 2)), B)
    with pytest.raises(ValueError):
        matrix_alignment(np.eye(2), np.eye(3))


def test_target_alignment_examples():
    y = np.array([1, -1, 1, -1])
    assert target_alignment(ideal_kernel(y), y) == pytest.approx(1.0)
    assert target_alignment(np.eye(4), y) == pytest.approx(0.5)


def test_polarity_examples():
    y = np.array([1, 1, -1, -1, 1, -1])
    assert polarity(ideal_kernel(y), y) == pytest.approx(36)
    assert polarity(np.zeros((6, 6)), y) == 0.0
    with pytest.raises(ValueError):
        polarity(np.eye(3), [1, 1, 1], rescale=True)


@settings(max_examples=40, deadline=None)
@given(balanced_labels, st.integers(0, 10**6))
def test_alignment_bounded(y, seed):
    rng = np.random.default_rng(seed)
    K = rng.normal(size=(len(y), len(y)))
    assert abs(target_alignment(K + K.T, y)) <= 1 + 1e-12


@settings(max_examples=30, deadline=None)
@given(balanced_labels, st.integers(0, 10**6))
def test_alignment_permutation_invariant(y, seed):
    rng = np.random.default_rng(seed)
    K = _psd(rng, len(y))
    p = rng.permutation(len(y))
    assert target_alignment(K[np.ix_(p, p)], y[p]) == pytest.approx(target_alignment(K, y), abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(balanced_labels, st.integers(0, 10**6))
def test_rescale_is_noop_when_balanced(y, seed):
    K = _psd(np.random.default_rng(seed), len(y))
    assert target_alignment(K, y, rescale=True) == pytest.approx(target_alignment(K, y), abs=1e-12)


# ---------------------------------------------------------------- class states


def test_hs_distance_identical_embeddings():
    # every point has the same features, so both class states coincide
    shape = AnsatzShape(2, 1)
    X = np.zeros((4, 2))
    assert hs_class_distance(X, [1, -1, 1, -1], random_parameters(shape, 0), shape) == pytest.approx(0, abs=1e-12)


def test_hs_distance_orthogonal_single_points():
    # theta = 0 and x = (0, 0) vs (pi, 0) give orthogonal states for N=2, L=1
    shape = AnsatzShape(2, 1)
    X = np.array([[0.0, 0.0], [math.pi, 0.0]])
    assert hs_class_distance(X, [1, -1], np.zeros(4), shape) == pytest.approx(2.0, abs=1e-12)


def test_class_states_are_states():
    shape = AnsatzShape(3, 2)
    rng = np.random.default_rng(0)
    rp, rm = class_states(rng.uniform(0, 1, (6, 2)), [1, 1, 1, -1, -1, 1],
                          random_parameters(shape, rng), shape)
    for rho in (rp, rm):
        assert np.trace(rho).real == pytest.approx(1.0)
        assert np.linalg.eigvalsh(rho)[0] > -1e-12
    with pytest.raises(ValueError):
        class_states(np.zeros((2, 2)), [1, 1], np.zeros(12), shape)


@pytest.mark.parametrize("seed", range(20))
def test_polarity_equals_hs_distance(seed):
    rng = np.random.default_rng(seed)
    shape = AnsatzShape(3, 2)
    X = rng.uniform(0, 1, (8, 2))
    y = rng.permutation([1, 1, 1, -1, -1, -1, 1, -1]) if seed % 2 else np.array([1] * 5 + [-1] * 3)
    theta = random_parameters(shape, rng)
    K = kernel_matrix(X, theta, shape)
    assert abs(polarity(K, y, rescale=True) - hs_class_distance(X, y, theta, shape)) < 1e-10


# ---------------------------------------------------------------- gradients


def test_batch_kernels_match_kernel_matrix():
    shape = AnsatzShape(2, 2)
    rng = np.random.default_rng(1)
    X = rng.uniform(0, 1, (5, 2))
    thetas = np.stack([random_parameters(shape, rng) for _ in range(3)])
    Ks = batch_kernels(X, thetas, shape)
    for t, K in zip(thetas, Ks):
        assert np.allclose(K, kernel_matrix(X, t, shape).values, atol=1e-13)
    noise = NoiseModel(0.97)
    Kn = batch_kernels(X, thetas[:1], shape, noise)[0]
    assert np.allclose(Kn, kernel_matrix(X, thetas[0], shape, noise).values, atol=1e-13)


def test_gradient_two_step_consistency():
    shape = AnsatzShape(3, 2)
    rng = np.random.default_rng(5)
    X = rng.uniform(0, 1, (6, 2))
    y = np.array([1, -1, 1, -1, 1, -1])
    theta = random_parameters(shape, rng)
    _, g = alignment_gradient(X, y, theta, shape, h=math.pi / 100)
    _, g_fine = alignment_gradient(X, y, theta, shape, h=math.pi / 1000)
    scale = np.max(np.abs(g_fine))
    rel = np.abs(g - g_fine) / np.maximum(np.abs(g_fine), 1e-3 * scale)
    assert np.all(rel <= 1e-3)


def test_gradient_matches_finite_alignment_difference():
    shape = AnsatzShape(2, 1)
    rng = np.random.default_rng(2)
    X = rng.uniform(0, 1, (4, 2))
    y = np.array([1, 1, -1, -1])
    theta = random_parameters(shape, rng)
    h = 1e-4
    _, g = alignment_gradient(X, y, theta, shape, h=h)
    for k in range(shape.num_params):
        e = np.zeros_like(theta)
        e[k] = h
        num = (target_alignment(kernel_matrix(X, theta + e, shape), y)
               - target_alignment(kernel_matrix(X, theta - e, shape), y)) / (2 * h)
        assert g[k] == pytest.approx(num, abs=1e-9)


# ---------------------------------------------------------------- training


def test_stratified_batches_hold_both_classes():
    rng = np.random.default_rng(0)
    y = np.array([1] * 20 + [-1] * 2)
    for _ in range(200):
        b = stratified_batch(y, 4, rng)
        assert len(np.unique(b)) == 4
        assert set(y[b]) == {1, -1}


def test_zero_iterations_is_noop():
    shape = AnsatzShape(2, 1)
    theta0 = random_parameters(shape, 0)
    tr, _ = gen_checkerboard(0)
    theta, hist = train_alignment(tr.X, tr.y, theta0, shape, TrainConfig(iterations=0))
    assert np.array_equal(theta, theta0)
    assert len(hist) == 0


def test_history_length_and_hashes(tmp_path):
    shape = AnsatzShape(2, 1)
    tr, _ = gen_checkerboard(1)
    theta0 = random_parameters(shape, 1)
    cfg = TrainConfig(iterations=7, log_every=3, seed=2)
    theta, hist = train_alignment(tr.X, tr.y, theta0, shape, cfg)
    assert len(hist) == 7 and len(hist.param_hashes) == 7
    assert hist.param_hashes[0] == params_hash(theta0)
    assert sorted(hist.full_alignment) == [0, 3, 6]
    assert np.array_equal(hist.params, theta)
    path = tmp_path / "hist.csv"
    hist.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "iteration,batch_alignment,full_alignment"
    assert len(lines) == 8
    assert lines[2].endswith(",")


def test_training_is_deterministic():
    shape = AnsatzShape(2, 2)
    tr, _ = gen_checkerboard(2)
    theta0 = random_parameters(shape, 3)
    cfg = TrainConfig(iterations=5, seed=9)
    a, _ = train_alignment(tr.X, tr.y, theta0, shape, cfg)
    b, _ = train_alignment(tr.X, tr.y, theta0, shape, cfg)
    assert np.array_equal(a, b)


def test_training_with_shots_and_noise_runs():
    shape = AnsatzShape(2, 1)
    tr, _ = gen_checkerboard(3)
    theta0 = random_parameters(shape, 0)
    theta, hist = train_alignment(tr.X, tr.y, theta0, shape, TrainConfig(iterations=3),
                                  NoiseModel(0.98), ShotConfig(200, 1))
    assert len(hist) == 3 and np.all(np.isfinite(theta))


def test_training_rejects_degenerate_batches():
    shape = AnsatzShape(2, 1)
    X = np.zeros((4, 2))
    with pytest.raises(ValueError):
        train_alignment(X, [1, 1, 1, 1], np.zeros(4), shape, TrainConfig(iterations=1))
    with pytest.raises(ValueError):
        train_alignment(X, [1, -1, 1, -1], np.zeros(5), shape)


def test_non_finite_alignment_raises(monkeypatch):
    import qek.alignment as al
    shape = AnsatzShape(2, 1)
    tr, _ = gen_checkerboard(0)
    monkeypatch.setattr(al, "batch_kernels", lambda *a, **k: np.zeros((9, 4, 4)))
    with pytest.raises(TrainingError):
        train_alignment(tr.X, tr.y, np.zeros(4), shape, TrainConfig(iterations=1))


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(batch_size=1)
    with pytest.raises(ValueError):
        TrainConfig(fd_step=0)


@pytest.mark.slow
def test_full_batch_training_improves_alignment():
    shape = AnsatzShape(5, 8)
    wins = 0
    for seed in range(10):
        tr, _ = gen_checkerboard(seed)
        theta0 = random_parameters(shape, seed)
        cfg = TrainConfig(learning_rate=5.0, batch_size=len(tr), iterations=15, seed=seed)
        theta, _ = train_alignment(tr.X, tr.y, theta0, shape, cfg)
        wins += full_alignment(tr.X, tr.y, theta, shape) > full_alignment(tr.X, tr.y, theta0, shape)
    assert wins >= 9
