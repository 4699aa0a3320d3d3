import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qek.embedding import AnsatzShape, build_embedding, random_parameters
from qek.kernel import (KernelMatrix, ProbabilityClampWarning, ShotConfig, cross_kernel_matrix,
                        global_depolarized_matrix, kernel_matrix, operator_norm_error_scan,
                        overlap_device, overlap_mixed, overlap_pure, rbf_kernel, sample_entry,
                        spectral_norm, swap_trick_overlap)
from qek.simulator import NoiseModel, apply_depolarizing, pure_density, simulate_pure

from oracles import reference_unitary

# frozen from the Kronecker-product/Pauli-twirl reference in oracles.py
DEVICE_SELF_OVERLAP_N3L3 = 0.8208407843314572
# frozen from one draw; the law of large numbers puts it within 0.01 of 0.5
SAMPLE_HALF_M1E5_SEED1234 = 0.49918


def _random_density(rng, d):
    A = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = A @ A.conj().T
    return rho / np.trace(rho)


# ---------------------------------------------------------------- overlaps


def test_self_overlap_is_one():
    shape = AnsatzShape(3, 2)
    theta = random_parameters(shape, 0)
    assert overlap_pure([0.3, 0.8], [0.3, 0.8], theta, shape) == pytest.approx(1.0, abs=1e-10)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10**6))
def test_overlap_symmetry(seed):
    rng = np.random.default_rng(seed)
    shape = AnsatzShape(3, 2)
    theta = random_parameters(shape, rng)
    x, xp = rng.uniform(-1, 1, 2), rng.uniform(-1, 1, 2)
    assert abs(overlap_pure(x, xp, theta, shape) - overlap_pure(xp, x, theta, shape)) < 1e-10


def test_two_qubit_overlap_against_matrix_product():
    shape = AnsatzShape(2, 1)
    c = build_embedding([0, 0], np.zeros(4), shape)
    cp = build_embedding([math.pi, 0], np.zeros(4), shape)
    ref = abs((reference_unitary(cp).conj().T @ reference_unitary(c))[0, 0]) ** 2
    assert ref < 1e-12
    assert overlap_pure([0, 0], [math.pi, 0], np.zeros(4), shape) == pytest.approx(ref, abs=1e-12)

    theta = np.array([0.4, 1.3, -0.7, 2.1])
    c = build_embedding([0.3, 0.9], theta, shape)
    cp = build_embedding([0.8, -0.2], theta, shape)
    ref = abs((reference_unitary(cp).conj().T @ reference_unitary(c))[0, 0]) ** 2
    assert overlap_pure([0.3, 0.9], [0.8, -0.2], theta, shape) == pytest.approx(ref, abs=1e-12)


def test_mixed_overlap_examples():
    psi = np.array([0.6, 0.8j])
    assert overlap_mixed(pure_density(psi), pure_density(psi)) == pytest.approx(1.0)
    assert overlap_mixed(np.eye(2) / 2, np.eye(2) / 2) == pytest.approx(0.5)
    zero = np.diag([1.0, 0.0])
    assert overlap_mixed(zero, apply_depolarizing(zero, 0.5)) == pytest.approx(0.75)
    with pytest.raises(ValueError):
        overlap_mixed(np.eye(2), np.eye(4))


@pytest.mark.parametrize("seed", range(10))
def test_swap_trick_equivalence(seed):
    rng = np.random.default_rng(seed)
    d = 2 if seed % 2 else 4
    rho, rho_p = _random_density(rng, d), _random_density(rng, d)
    assert abs(overlap_mixed(rho, rho_p) - swap_trick_overlap(rho, rho_p)) < 1e-10


def test_mixed_overlap_matches_pure_for_pure_states():
    shape = AnsatzShape(3, 2)
    theta = random_parameters(shape, 5)
    a = simulate_pure(build_embedding([0.1, 0.5], theta, shape))
    b = simulate_pure(build_embedding([0.7, 0.2], theta, shape))
    assert abs(overlap_mixed(pure_density(a), pure_density(b))
               - overlap_pure([0.1, 0.5], [0.7, 0.2], theta, shape)) < 1e-10


def test_device_overlap_limits():
    shape = AnsatzShape(2, 2)
    theta = random_parameters(shape, 1)
    x, xp = [0.2, 0.4], [0.9, 0.1]
    assert overlap_device(x, xp, theta, shape, NoiseModel(1.0)) == pytest.approx(
        overlap_pure(x, xp, theta, shape), abs=1e-10)


def test_zero_base_survival_mixes_deep_circuits():
    # gate survivals at lambda_0 = 0 stay positive (H keeps 1/2), so the
    # output only approaches 2^-N; four blocks are enough for 1e-10
    for n in (2, 3):
        shape = AnsatzShape(n, 4)
        theta = random_parameters(shape, 1)
        value = overlap_device([0.2, 0.4], [0.9, 0.1], theta, shape, NoiseModel(0.0))
        assert value == pytest.approx(2.0**-n, abs=1e-10)


def test_device_self_overlap_fixture():
    shape = AnsatzShape(3, 3)
    theta = np.linspace(0.1, 1.7, 18)
    x = np.array([0.3, 0.7])
    value = overlap_device(x, x, theta, shape, NoiseModel(0.98))
    assert value < 1
    assert value == pytest.approx(DEVICE_SELF_OVERLAP_N3L3, abs=1e-10)


# ---------------------------------------------------------------- global depolarizing


def test_global_depolarized_examples():
    rng = np.random.default_rng(0)
    K = kernel_matrix(rng.uniform(0, 1, (5, 2)), random_parameters(AnsatzShape(2, 1), rng),
                      AnsatzShape(2, 1))
    same = global_depolarized_matrix(K.values, np.ones(5), 2)
    assert np.allclose(same.values, K.values, atol=1e-15)
    assert same.provenance == "DEVICE"
    one = global_depolarized_matrix(np.ones((2, 2)), np.full(2, math.sqrt(0.9)), 1)
    assert one.values[0, 1] == pytest.approx(0.95)
    with pytest.raises(ValueError):
        global_depolarized_matrix(np.ones((2, 2)), np.ones(3), 1)


# ---------------------------------------------------------------- sampling


@pytest.mark.parametrize("M", [1, 7, 1000])
def test_degenerate_bernoulli(M):
    assert sample_entry(0.0, ShotConfig(M, 3), (0, 1)) == 0.0
    assert sample_entry(1.0, ShotConfig(M, 3), (0, 1)) == 1.0


def test_large_sample_fixture():
    est = sample_entry(0.5, ShotConfig(100_000, 1234), (0, 1))
    assert abs(est - 0.5) < 0.01
    assert est == SAMPLE_HALF_M1E5_SEED1234


def test_sampling_reproducible_and_keyed():
    cfg = ShotConfig(50, 99)
    a = [sample_entry(0.37, cfg, (2, 5)) for _ in range(3)]
    assert a[0] == a[1] == a[2]
    draws = {sample_entry(0.37, cfg, (i, 5)) for i in range(20)}
    assert len(draws) > 1


def test_sampling_unbiased_at_one_shot():
    p = 0.3
    vals = np.array([sample_entry(p, ShotConfig(1, 7), (i, i + 1)) for i in range(10_000)])
    se = math.sqrt(p * (1 - p) / len(vals))
    assert abs(vals.mean() - p) < 3 * se


def test_probability_clamp_warning():
    with pytest.warns(ProbabilityClampWarning):
        assert sample_entry(1 + 1e-13, ShotConfig(10, 0), (0, 1)) == 1.0


def test_shot_config_validation():
    with pytest.raises(ValueError):
        ShotConfig(0, 1)


# ---------------------------------------------------------------- matrices


@pytest.mark.parametrize("seed", range(20))
def test_exact_matrix_properties(seed):
    rng = np.random.default_rng(seed)
    shape = AnsatzShape(2 + seed % 3, 1 + seed % 3)
    X = rng.uniform(-1, 1, (8, 2))
    K = kernel_matrix(X, random_parameters(shape, rng), shape)
    assert K.provenance == "EXACT"
    assert np.array_equal(K.values, K.values.T)
    assert np.all(np.diag(K.values) == 1.0)
    assert np.linalg.eigvalsh(K.values)[0] >= -1e-9
    assert np.all((K.values >= 0) & (K.values <= 1 + 1e-12))


def test_exact_matrix_matches_adjoint_circuit():
    shape = AnsatzShape(3, 2)
    rng = np.random.default_rng(4)
    X = rng.uniform(0, 1, (5, 2))
    theta = random_parameters(shape, rng)
    K = kernel_matrix(X, theta, shape).values
    for i in range(5):
        for j in range(i + 1, 5):
            assert abs(K[i, j] - overlap_pure(X[i], X[j], theta, shape)) < 1e-12


def test_device_matrix_with_measured_diagonal():
    shape = AnsatzShape(2, 2)
    rng = np.random.default_rng(2)
    X = rng.uniform(0, 1, (4, 2))
    theta = random_parameters(shape, rng)
    noise = NoiseModel(0.95)
    K = kernel_matrix(X, theta, shape, noise, measure_diagonal=True)
    assert K.provenance == "DEVICE" and K.diagonal_measured
    assert np.all(np.diag(K.values) < 1)
    for i in range(4):
        for j in range(i, 4):
            assert abs(K.values[i, j] - overlap_device(X[i], X[j], theta, shape, noise)) < 1e-12
    K2 = kernel_matrix(X, theta, shape, noise)
    assert not K2.diagonal_measured and np.all(np.diag(K2.values) == 1.0)


def test_threaded_device_matrix_is_identical():
    shape = AnsatzShape(2, 1)
    rng = np.random.default_rng(8)
    X = rng.uniform(0, 1, (20, 2))
    theta = random_parameters(shape, rng)
    a = kernel_matrix(X, theta, shape, NoiseModel(0.9), ShotConfig(64, 5, True))
    b = kernel_matrix(X, theta, shape, NoiseModel(0.9), ShotConfig(64, 5, True), threads=3)
    assert np.array_equal(a.values, b.values)


def test_sampled_matrix_converges():
    shape = AnsatzShape(2, 2)
    rng = np.random.default_rng(3)
    X = rng.uniform(0, 1, (10, 2))
    theta = random_parameters(shape, rng)
    exact = kernel_matrix(X, theta, shape).values
    devs = []
    for M in (100, 10_000):
        K = kernel_matrix(X, theta, shape, shots=ShotConfig(M, 1))
        assert K.provenance == "SAMPLED" and K.shots == M
        devs.append(np.max(np.abs(K.values - exact)))
    assert devs[1] < devs[0] / 3


def test_cross_matrix_matches_square():
    shape = AnsatzShape(3, 1)
    rng = np.random.default_rng(1)
    X = rng.uniform(0, 1, (6, 2))
    theta = random_parameters(shape, rng)
    K = kernel_matrix(X, theta, shape).values
    C = cross_kernel_matrix(X[:2], X, theta, shape)
    assert np.allclose(C[:, 2:], K[:2, 2:], atol=1e-12)


def test_kernel_matrix_validation():
    with pytest.raises(ValueError):
        kernel_matrix([[0.1, 0.2]], np.zeros(4), AnsatzShape(2, 1))
    with pytest.raises(ValueError):
        KernelMatrix(np.array([[1, 0.2], [0.3, 1]]))
    with pytest.raises(ValueError):
        KernelMatrix(np.eye(2), provenance="HARDWARE")


# ---------------------------------------------------------------- rbf


def test_rbf_examples():
    assert rbf_kernel([1, 2], [1, 2], 0.5) == 1.0
    assert rbf_kernel([0, 0], [math.sqrt(2) * 0.7, 0], 0.7) == pytest.approx(math.exp(-1))
    assert rbf_kernel([0, 0], [1, 0], 1e6) >= 1 - 1e-10
    with pytest.raises(ValueError):
        rbf_kernel([0], [1], 0)


# ---------------------------------------------------------------- error scaling


def test_spectral_norm_matches_svd():
    rng = np.random.default_rng(0)
    for _ in range(5):
        E = rng.normal(size=(15, 15))
        E = E + E.T
        assert spectral_norm(E) == pytest.approx(np.linalg.norm(E, 2), rel=1e-6)
    assert spectral_norm(np.zeros((3, 3))) == 0.0


def _exact(n, seed=0):
    shape = AnsatzShape(2, 2)
    rng = np.random.default_rng(seed)
    return kernel_matrix(rng.uniform(0, 1, (n, 2)), random_parameters(shape, rng), shape).values


def test_error_scan_zero_shots_is_exact():
    assert operator_norm_error_scan(_exact(5), [0], 3, 0) == [(0, 0.0)]


def test_quadrupling_shots_halves_error():
    rows = dict(operator_norm_error_scan(_exact(20), [256, 1024], 20, 1))
    assert rows[1024] / rows[256] == pytest.approx(0.5, rel=0.2)


def test_doubling_n_scales_error_by_sqrt2():
    K = _exact(40)
    small = dict(operator_norm_error_scan(K[:20, :20], [512], 20, 2))[512]
    large = dict(operator_norm_error_scan(K, [512], 20, 2))[512]
    assert large / small == pytest.approx(math.sqrt(2), rel=0.25)
