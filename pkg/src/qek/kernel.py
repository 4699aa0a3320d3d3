"""Quantum embedding kernel values and matrices.

Four ways to obtain a kernel matrix are supported:

* ``EXACT``: noiseless statevector overlaps, diagonal fixed to one.
* ``DEVICE``: the overlap circuit ``U(x) U(x')^dagger`` simulated under the
  local depolarizing noise model, reading the all-zero probability.
* ``SAMPLED``: Bernoulli estimates of either of the above with ``M`` shots
  per entry, each entry drawing from its own RNG stream keyed by
  ``(seed, i, j)``.
* ``POST``: anything produced by :mod:`qek.postprocess`.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .embedding import AnsatzShape, build_embedding, embedded_states, overlap_ops
from .simulator import NoiseModel, run_mixed, simulate_noisy, simulate_pure

PROVENANCES = ("EXACT", "DEVICE", "SAMPLED", "POST")

_CHUNK = 128


class ProbabilityClampWarning(RuntimeWarning):
    pass


@dataclass
class KernelMatrix:
    """Square kernel matrix with provenance metadata.

    ``shots`` is the number of circuit evaluations per entry, 0 for
    analytic values. ``meta`` carries free-form provenance (seed, dataset
    id, parameter hash, clamp counts, ...).
    """

    values: np.ndarray
    provenance: str = "EXACT"
    shots: int = 0
    diagonal_measured: bool = False
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2 or self.values.shape[0] != self.values.shape[1]:
            raise ValueError(f"kernel matrix must be square, got shape {self.values.shape}")
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")
        if not np.allclose(self.values, self.values.T, rtol=0, atol=1e-9):
            raise ValueError("kernel matrix is not symmetric")

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    @property
    def n(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class ShotConfig:
    shots: int
    seed: int = 0
    measure_diagonal: bool = False

    def __post_init__(self):
        if self.shots < 1:
            raise ValueError("shots must be at least 1")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


# --------------------------------------------------------------------------
# single values


def overlap_pure(x, xp, theta, shape: AnsatzShape) -> float:
    """``|<0| U(x')^dagger U(x) |0>|^2`` via the adjoint circuit."""
    circuit = build_embedding(x, theta, shape) + build_embedding(xp, theta, shape).adjoint()
    amp0 = simulate_pure(circuit)[0]
    return float(abs(amp0) ** 2)


def overlap_mixed(rho, rho_p) -> float:
    """Hilbert-Schmidt overlap ``Tr(rho rho')``."""
    rho, rho_p = np.asarray(rho), np.asarray(rho_p)
    if rho.shape != rho_p.shape:
        raise ValueError(f"dimension mismatch: {rho.shape} vs {rho_p.shape}")
    # Tr(AB) = sum_ij A_ij B_ji
    return float(np.real(np.sum(rho * rho_p.T)))


def swap_trick_overlap(rho, rho_p) -> float:
    """``Tr((rho ⊗ rho') S)`` with ``S`` the swap of the two registers."""
    rho, rho_p = np.asarray(rho), np.asarray(rho_p)
    d = rho.shape[0]
    swap = np.zeros((d * d, d * d))
    for a in range(d):
        for b in range(d):
            swap[b * d + a, a * d + b] = 1.0
    return float(np.real(np.trace(np.kron(rho, rho_p) @ swap)))


def overlap_device(x, xp, theta, shape: AnsatzShape, noise: NoiseModel) -> float:
    """All-zero probability of the noisy overlap circuit with naive adjoint."""
    circuit = build_embedding(x, theta, shape) + build_embedding(xp, theta, shape).adjoint()
    rho = simulate_noisy(circuit, noise)
    return float(np.real(rho[0, 0]))


def rbf_kernel(x, xp, sigma: float) -> float:
    """Gaussian kernel ``exp(-|x - x'|^2 / (2 sigma^2))``."""
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    d = np.asarray(x, dtype=float) - np.asarray(xp, dtype=float)
    return float(np.exp(-np.dot(d, d) / (2 * sigma**2)))


def rbf_kernel_matrix(X, Y, sigma: float) -> np.ndarray:
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    X, Y = np.atleast_2d(X), np.atleast_2d(Y)
    sq = np.sum(X**2, 1)[:, None] + np.sum(Y**2, 1)[None, :] - 2 * X @ Y.T
    return np.exp(-np.maximum(sq, 0) / (2 * sigma**2))


def global_depolarized_matrix(K, lambdas, num_qubits: int) -> KernelMatrix:
    """Kernel matrix of globally depolarized embeddings.

    ``K_dev[i, j] = l_i l_j K[i, j] + (1 - l_i l_j) / 2**N``.
    """
    K = np.asarray(K, dtype=float)
    lambdas = np.asarray(lambdas, dtype=float)
    if lambdas.shape != (K.shape[0],):
        raise ValueError(f"need {K.shape[0]} survival probabilities, got {lambdas.shape}")
    if np.any(lambdas < 0) or np.any(lambdas > 1):
        raise ValueError("survival probabilities must lie in [0, 1]")
    ll = np.outer(lambdas, lambdas)
    values = ll * K + (1 - ll) / 2**num_qubits
    return KernelMatrix(values, "DEVICE", diagonal_measured=True,
                        meta={"num_qubits": num_qubits, "global_depolarizing": True})


# --------------------------------------------------------------------------
# sampling


def _clip_probability(p: float) -> tuple[float, bool]:
    if 0.0 <= p <= 1.0:
        return p, False
    return min(max(p, 0.0), 1.0), True


def entry_rng(seed: int, i: int, j: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(i), int(j)])


def sample_entry(p: float, cfg: ShotConfig, entry: tuple[int, int]) -> float:
    """Mean of ``cfg.shots`` Bernoulli(p) outcomes for matrix entry ``entry``.

    Probabilities outside ``[0, 1]`` (round-off from the simulator) are
    clamped with a :class:`ProbabilityClampWarning`.
    """
    p, clamped = _clip_probability(float(p))
    if clamped:
        warnings.warn(f"probability clamped to {p} for entry {entry}", ProbabilityClampWarning)
    rng = entry_rng(cfg.seed, *entry)
    return rng.binomial(cfg.shots, p) / cfg.shots


def _sample_matrix(P: np.ndarray, cfg: ShotConfig, with_diagonal: bool) -> tuple[np.ndarray, int]:
    n = P.shape[0]
    out = np.ones((n, n))
    n_clamped = 0
    for i in range(n):
        for j in range(i if with_diagonal else i + 1, n):
            p, clamped = _clip_probability(float(P[i, j]))
            n_clamped += clamped
            out[i, j] = out[j, i] = sample_entry(p, cfg, (i, j))
    return out, n_clamped


# --------------------------------------------------------------------------
# matrices


def _exact_cross(XA, XB, theta, shape) -> np.ndarray:
    SA = embedded_states(XA, theta, shape)
    SB = embedded_states(XB, theta, shape)
    return np.abs(SA.conj() @ SB.T) ** 2


def _device_pairs(XA, XB, theta, shape, noise, threads) -> np.ndarray:
    """Noisy overlap probabilities for row-aligned pairs ``(XA[k], XB[k])``."""
    chunks = [slice(s, s + _CHUNK) for s in range(0, len(XA), _CHUNK)]

    def run(sl):
        ops, batch = overlap_ops(XA[sl], XB[sl], theta, shape)
        rho = run_mixed(shape.num_qubits, ops, batch, noise)
        return np.real(rho[:, 0, 0])

    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, chunks))
    else:
        parts = [run(sl) for sl in chunks]
    return np.concatenate(parts) if parts else np.zeros(0)


def kernel_matrix(
    X,
    theta,
    shape: AnsatzShape,
    noise: NoiseModel | None = None,
    shots: ShotConfig | None = None,
    measure_diagonal: bool | None = None,
    threads: int = 1,
) -> KernelMatrix:
    """Square kernel matrix of the points ``X``.

    Only the upper triangle is computed and then mirrored. The diagonal is
    simulated (or sampled) only when ``measure_diagonal`` is set, falling
    back to ``shots.measure_diagonal``; otherwise it is fixed to one.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    theta = np.asarray(theta, dtype=float)
    n = len(X)
    if n < 2:
        raise ValueError("need at least two points")
    if measure_diagonal is None:
        measure_diagonal = shots.measure_diagonal if shots is not None else False

    if noise is None:
        P = _exact_cross(X, X, theta, shape)
        np.fill_diagonal(P, 1.0)
        P = (P + P.T) / 2
        provenance = "EXACT"
    else:
        iu = np.triu_indices(n, 0 if measure_diagonal else 1)
        probs = _device_pairs(X[iu[0]], X[iu[1]], theta, shape, noise, threads)
        P = np.ones((n, n))
        P[iu] = probs
        P[iu[1], iu[0]] = probs
        provenance = "DEVICE"

    meta = {"num_qubits": shape.num_qubits, "num_layers": shape.num_layers}
    if noise is not None:
        meta["base_survival"] = noise.base_survival
    diagonal_measured = bool(measure_diagonal) or noise is None
    if shots is None:
        return KernelMatrix(P, provenance, 0, diagonal_measured, meta)

    values, n_clamped = _sample_matrix(P, shots, with_diagonal=bool(measure_diagonal))
    meta.update(seed=shots.seed, n_clamped=n_clamped, sampled_from=provenance)
    return KernelMatrix(values, "SAMPLED", shots.shots, bool(measure_diagonal), meta)


def cross_kernel_matrix(
    X_rows,
    X_cols,
    theta,
    shape: AnsatzShape,
    noise: NoiseModel | None = None,
    shots: ShotConfig | None = None,
    threads: int = 1,
) -> np.ndarray:
    """Rectangular kernel matrix ``k(X_rows[a], X_cols[b])`` for prediction."""
    XA = np.atleast_2d(np.asarray(X_rows, dtype=float))
    XB = np.atleast_2d(np.asarray(X_cols, dtype=float))
    theta = np.asarray(theta, dtype=float)
    if noise is None:
        P = _exact_cross(XA, XB, theta, shape)
    else:
        ia, ib = np.meshgrid(np.arange(len(XA)), np.arange(len(XB)), indexing="ij")
        ia, ib = ia.ravel(), ib.ravel()
        P = _device_pairs(XA[ia], XB[ib], theta, shape, noise, threads).reshape(len(XA), len(XB))
    if shots is None:
        return P
    out = np.empty_like(P)
    for a in range(P.shape[0]):
        for b in range(P.shape[1]):
            # offset row ids so cross entries never share streams with square ones
            out[a, b] = sample_entry(_clip_probability(float(P[a, b]))[0], shots,
                                     (P.shape[1] + a, b))
    return out


# --------------------------------------------------------------------------
# finite-sampling error scaling


def spectral_norm(E, tol: float = 1e-8, max_iter: int = 10_000) -> float:
    """Largest singular value by power iteration on ``E^T E``."""
    E = np.asarray(E, dtype=float)
    if not np.any(E):
        return 0.0
    G = E.T @ E
    v = np.random.default_rng(0).standard_normal(G.shape[0])
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(max_iter):
        w = G @ v
        new = float(v @ w)
        norm = np.linalg.norm(w)
        if norm == 0:
            return 0.0
        v = w / norm
        if abs(new - est) <= tol * max(new, 1e-300):
            est = new
            break
        est = new
    return math.sqrt(max(est, 0.0))


def operator_norm_error_scan(K_exact, shots_list, trials: int, seed: int) -> list[tuple[int, float]]:
    """Mean spectral-norm error of shot-sampled estimates of ``K_exact``.

    Each of the ``trials`` sampled matrices for a given ``M`` uses its own
    seed derived from ``(seed, M, trial)``. ``M = 0`` stands for the
    analytic limit and yields zero error.
    """
    K = np.asarray(K_exact, dtype=float)
    if np.any(K < 0) or np.any(K > 1):
        raise ValueError("kernel entries must be probabilities")
    rows = []
    for M in shots_list:
        if M == 0:
            rows.append((0, 0.0))
            continue
        errs = []
        for t in range(trials):
            trial_seed = int(np.random.SeedSequence([seed, M, t]).generate_state(1, np.uint64)[0])
            cfg = ShotConfig(int(M), trial_seed)
            Kbar, _ = _sample_matrix(K, cfg, with_diagonal=True)
            errs.append(spectral_norm(Kbar - K))
        rows.append((int(M), float(np.mean(errs))))
    return rows
