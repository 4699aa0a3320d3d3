"""Kernel-target alignment, polarity and alignment-driven training."""

from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_labels
from .embedding import AnsatzShape, embedded_states, overlap_ops
from .exceptions import TrainingError
from .kernel import ShotConfig, _clip_probability, entry_rng
from .simulator import NoiseModel, run_mixed


def ideal_kernel(labels) -> np.ndarray:
    """Ideal kernel matrix ``y y^T``."""
    y = check_labels(labels).astype(float)
    return np.outer(y, y)


def matrix_alignment(A, B) -> float:
    """Frobenius cosine ``<A, B>_F / sqrt(<A, A>_F <B, B>_F)``."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape != B.shape:
        raise ValueError(f"shape mismatch: {A.shape} vs {B.shape}")
    na, nb = np.sum(A * A), np.sum(B * B)
    if na == 0 or nb == 0:
        raise ValueError("alignment is undefined for an all-zero matrix")
    return float(np.sum(A * B) / math.sqrt(na * nb))


def _rescaled(labels, rescale: bool) -> np.ndarray:
    y = check_labels(labels).astype(float)
    if not rescale:
        return y
    n_pos, n_neg = np.sum(y > 0), np.sum(y < 0)
    if n_pos == 0 or n_neg == 0:
        raise ValueError("label rescaling needs both classes present")
    return np.where(y > 0, y / n_pos, y / n_neg)


def target_alignment(K, labels, rescale: bool = False) -> float:
    """Alignment of ``K`` with the (optionally class-rescaled) ideal kernel."""
    K = np.asarray(K, dtype=float)
    y = _rescaled(labels, rescale)
    if len(y) != K.shape[0]:
        raise ValueError(f"{len(y)} labels for a {K.shape[0]}x{K.shape[0]} kernel")
    return matrix_alignment(K, np.outer(y, y))


def polarity(K, labels, rescale: bool = False) -> float:
    """Unnormalized alignment ``sum_ij y_i y_j K_ij``."""
    K = np.asarray(K, dtype=float)
    y = _rescaled(labels, rescale)
    if len(y) != K.shape[0]:
        raise ValueError(f"{len(y)} labels for a {K.shape[0]}x{K.shape[0]} kernel")
    return float(y @ K @ y)


def class_states(X, labels, theta, shape: AnsatzShape) -> tuple[np.ndarray, np.ndarray]:
    """Class-averaged density matrices of the noiseless embedding."""
    y = check_labels(labels)
    if not (np.any(y > 0) and np.any(y < 0)):
        raise ValueError("both classes must be non-empty")
    S = embedded_states(X, theta, shape)
    rho = {}
    for sign in (1, -1):
        Sc = S[y == sign]
        rho[sign] = np.einsum("ki,kj->ij", Sc, Sc.conj()) / len(Sc)
    return rho[1], rho[-1]


def hs_class_distance(X, labels, theta, shape: AnsatzShape) -> float:
    """Hilbert-Schmidt distance ``Tr((rho_+ - rho_-)^2)`` of the class states."""
    rho_p, rho_m = class_states(X, labels, theta, shape)
    D = rho_p - rho_m
    return float(np.real(np.trace(D @ D)))


# --------------------------------------------------------------------------
# training


@dataclass
class TrainConfig:
    learning_rate: float = 0.2
    batch_size: int = 4
    iterations: int = 500
    fd_step: float = math.pi / 100
    seed: int = 0
    rescale: bool = False
    # full-dataset alignment is logged every `log_every` iterations (0: never)
    log_every: int = 0

    def __post_init__(self):
        if self.batch_size < 2:
            raise ValueError("batch_size must be at least 2")
        if not self.fd_step > 0:
            raise ValueError("fd_step must be positive")
        if self.iterations < 0:
            raise ValueError("iterations must be non-negative")


def params_hash(theta) -> str:
    return hashlib.sha1(np.ascontiguousarray(theta, dtype=float).tobytes()).hexdigest()[:16]


@dataclass
class TrainHistory:
    batch_alignment: list[float] = field(default_factory=list)
    param_hashes: list[str] = field(default_factory=list)
    full_alignment: dict[int, float] = field(default_factory=dict)
    params: np.ndarray | None = None

    def __len__(self):
        return len(self.batch_alignment)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "batch_alignment", "full_alignment"])
            for it, a in enumerate(self.batch_alignment):
                full = self.full_alignment.get(it)
                w.writerow([it, repr(a), "" if full is None else repr(full)])


def batch_kernels(
    X,
    thetas,
    shape: AnsatzShape,
    noise: NoiseModel | None = None,
    shots: ShotConfig | None = None,
    index=None,
) -> np.ndarray:
    """Kernel matrices of points ``X`` for each parameter vector in ``thetas``.

    Returns shape ``(P, B, B)``. The diagonal is fixed to one. ``index``
    gives the dataset indices of ``X`` used to key the shot RNG streams.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    P, B = len(thetas), len(X)
    if noise is None:
        Xr = np.tile(X, (P, 1))
        Tr = np.repeat(thetas, B, axis=0)
        S = embedded_states(Xr, Tr, shape).reshape(P, B, -1)
        K = np.abs(np.einsum("pai,pbi->pab", S.conj(), S)) ** 2
    else:
        iu = np.triu_indices(B, 1)
        npairs = len(iu[0])
        XA = np.tile(X[iu[0]], (P, 1))
        XB = np.tile(X[iu[1]], (P, 1))
        Tr = np.repeat(thetas, npairs, axis=0)
        probs = np.empty(len(XA))
        step = 256
        for s in range(0, len(XA), step):
            sl = slice(s, s + step)
            ops, batch = overlap_ops(XA[sl], XB[sl], Tr[sl], shape)
            probs[sl] = np.real(run_mixed(shape.num_qubits, ops, batch, noise)[:, 0, 0])
        K = np.ones((P, B, B))
        probs = probs.reshape(P, npairs)
        K[:, iu[0], iu[1]] = probs
        K[:, iu[1], iu[0]] = probs
    idx = np.arange(B) if index is None else np.asarray(index)
    for p in range(P):
        np.fill_diagonal(K[p], 1.0)
        if shots is not None:
            seed = int(np.random.SeedSequence([shots.seed, p]).generate_state(1, np.uint64)[0])
            for a in range(B):
                for b in range(a + 1, B):
                    i, j = sorted((int(idx[a]), int(idx[b])))
                    prob = _clip_probability(float(K[p, a, b]))[0]
                    K[p, a, b] = K[p, b, a] = entry_rng(seed, i, j).binomial(shots.shots, prob) / shots.shots
    return K


def _alignments(K, y, rescale) -> np.ndarray:
    yh = _rescaled(y, rescale)
    T = np.outer(yh, yh)
    num = np.einsum("pab,ab->p", K, T)
    den = np.sqrt(np.einsum("pab,pab->p", K, K) * np.sum(T * T))
    with np.errstate(divide="ignore", invalid="ignore"):
        return num / den


def alignment_gradient(
    X, labels, theta, shape: AnsatzShape, h: float = math.pi / 100, rescale: bool = False,
    noise: NoiseModel | None = None, shots: ShotConfig | None = None, index=None,
) -> tuple[float, np.ndarray]:
    """Alignment at ``theta`` and its central finite-difference gradient."""
    theta = np.asarray(theta, dtype=float)
    d = len(theta)
    shifts = np.concatenate([np.zeros((1, d)), h * np.eye(d), -h * np.eye(d)])
    K = batch_kernels(X, theta[None] + shifts, shape, noise, shots, index)
    a = _alignments(K, labels, rescale)
    return float(a[0]), (a[1:d + 1] - a[d + 1:]) / (2 * h)


def stratified_batch(labels, size: int, rng: np.random.Generator) -> np.ndarray:
    """Random batch with at least one point of each class."""
    y = np.asarray(labels)
    n = len(y)
    if size >= n:
        return np.arange(n)
    pos, neg = np.flatnonzero(y > 0), np.flatnonzero(y < 0)
    picked = [rng.choice(pos), rng.choice(neg)]
    rest = np.setdiff1d(np.arange(n), picked)
    picked.extend(rng.choice(rest, size - 2, replace=False))
    return np.sort(np.asarray(picked))


def train_alignment(
    X,
    labels,
    theta0,
    shape: AnsatzShape,
    cfg: TrainConfig | None = None,
    noise: NoiseModel | None = None,
    shots: ShotConfig | None = None,
) -> tuple[np.ndarray, TrainHistory]:
    """Stochastic gradient ascent on the batch kernel-target alignment."""
    cfg = cfg or TrainConfig()
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = check_labels(labels)
    theta = np.array(theta0, dtype=float)
    if theta.shape != (shape.num_params,):
        raise ValueError(f"theta0 must have length {shape.num_params}")
    if not (np.any(y > 0) and np.any(y < 0)):
        raise ValueError("training data must contain both classes")
    rng = np.random.default_rng(cfg.seed)
    hist = TrainHistory()

    for it in range(cfg.iterations):
        batch = stratified_batch(y, cfg.batch_size, rng)
        step_shots = None
        if shots is not None:
            s = int(np.random.SeedSequence([shots.seed, it]).generate_state(1, np.uint64)[0])
            step_shots = ShotConfig(shots.shots, s)
        value, grad = alignment_gradient(
            X[batch], y[batch], theta, shape, cfg.fd_step, cfg.rescale, noise, step_shots, batch
        )
        if not (math.isfinite(value) and np.all(np.isfinite(grad))):
            raise TrainingError(
                f"non-finite alignment at iteration {it} (batch {batch.tolist()}, "
                f"value {value})"
            )
        hist.batch_alignment.append(value)
        hist.param_hashes.append(params_hash(theta))
        if cfg.log_every and it % cfg.log_every == 0:
            hist.full_alignment[it] = full_alignment(X, y, theta, shape, cfg.rescale)
        theta = theta + cfg.learning_rate * grad

    hist.params = theta
    return theta, hist


def full_alignment(X, labels, theta, shape: AnsatzShape, rescale: bool = False) -> float:
    K = batch_kernels(X, theta, shape)[0]
    return target_alignment(K, labels, rescale)
