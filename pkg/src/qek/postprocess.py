"""Device-noise mitigation, PSD regularization and their combinations.

A post-processing strategy is a triple ``(R1, M, R2)``: regularize,
mitigate, regularize again. Regularizers are ``Id``, ``TIK`` (spectrum
shift), ``THR`` (negative eigenvalue clamping) and ``SDP`` (nearest PSD
matrix with unit diagonal); mitigations are ``Id``, ``SINGLE``, ``MEAN``
and ``SPLIT``.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ._validation import symmetrize
from .alignment import matrix_alignment
from .exceptions import MitigationInfeasible, NonConvergence
from .kernel import KernelMatrix

REGULARIZERS = ("Id", "TIK", "THR", "SDP")
MITIGATIONS = ("Id", "SINGLE", "MEAN", "SPLIT")

_TIK_THRESHOLD = -1e-12
_PSD_REGULARIZERS = ("TIK", "THR")


class NonConvergenceWarning(RuntimeWarning):
    pass


# --------------------------------------------------------------------------
# mitigation


@dataclass(frozen=True)
class SurvivalEstimate:
    mode: str
    lambdas: np.ndarray
    used: tuple[int, ...]

    def per_point(self, n: int) -> np.ndarray:
        if self.mode == "SPLIT":
            return self.lambdas
        return np.full(n, float(self.lambdas[0]))


def _diagonal(K):
    if isinstance(K, KernelMatrix) and not K.diagonal_measured:
        raise MitigationInfeasible("mitigation needs measured diagonal entries")
    return np.diag(np.asarray(K, dtype=float))


def estimate_survival(K_dev, mode: str, num_qubits: int, n_mean: int | None = None) -> SurvivalEstimate:
    """Infer survival probabilities from the decay of the kernel diagonal.

    ``SINGLE`` uses the first diagonal entry, ``MEAN`` averages the
    per-entry estimates of the first ``n_mean`` entries (all by default)
    and ``SPLIT`` keeps one estimate per point.
    """
    diag = _diagonal(K_dev)
    n = len(diag)
    if mode == "SINGLE":
        used = (0,)
    elif mode == "MEAN":
        m = n if n_mean is None else n_mean
        if not 1 <= m <= n:
            raise ValueError(f"n_mean must lie in [1, {n}], got {m}")
        used = tuple(range(m))
    elif mode == "SPLIT":
        used = tuple(range(n))
    else:
        raise ValueError(f"unknown mitigation mode {mode!r}")

    floor = 2.0**-num_qubits
    d = diag[list(used)]
    if np.any(d <= floor):
        i = used[int(np.argmax(d <= floor))]
        raise MitigationInfeasible(
            f"diagonal entry {i} = {diag[i]:.6g} is at or below 2^-N = {floor:.6g}"
        )
    if np.any(d > 1 + 1e-12):
        i = used[int(np.argmax(d > 1 + 1e-12))]
        raise MitigationInfeasible(f"diagonal entry {i} = {diag[i]:.6g} exceeds 1")
    lam = np.sqrt(np.minimum((d - floor) / (1 - floor), 1.0))
    if mode in ("SINGLE", "MEAN"):
        lam = np.array([lam.mean()])
    return SurvivalEstimate(mode, lam, used)


def mitigate(K_dev, est: SurvivalEstimate, num_qubits: int) -> np.ndarray:
    """Invert global depolarizing noise entrywise with the estimated survival."""
    K = np.asarray(K_dev, dtype=float)
    lam = est.per_point(K.shape[0])
    ll = np.outer(lam, lam)
    return (K - 2.0**-num_qubits * (1 - ll)) / ll


# --------------------------------------------------------------------------
# regularization


def regularize_tikhonov(A) -> np.ndarray:
    """Shift the spectrum up by the smallest eigenvalue when it is negative."""
    A = symmetrize(A)
    sigma_min = np.linalg.eigvalsh(A)[0]
    if sigma_min < _TIK_THRESHOLD:
        return A - sigma_min * np.eye(len(A))
    return A


def regularize_threshold(A) -> np.ndarray:
    """Set negative eigenvalues to zero (Frobenius-nearest PSD matrix)."""
    A = symmetrize(A)
    w, V = np.linalg.eigh(A)
    if w[0] >= 0:
        return A
    return symmetrize((V * np.maximum(w, 0)) @ V.T)


def regularize_sdp(A, tol: float = 1e-8, max_iter: int = 10_000, return_info: bool = False):
    """Nearest PSD matrix with unit diagonal in Frobenius norm.

    Alternating projections between the PSD cone and the unit-diagonal
    affine set, with Dykstra's correction on the (non-affine) PSD step.
    The last PSD iterate is rescaled to an exactly unit diagonal.
    """
    A = symmetrize(A)
    n = len(A)
    idx = np.arange(n)
    Y = A.copy()
    X = np.eye(n)
    correction = np.zeros_like(A)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        R = Y - correction
        w, V = np.linalg.eigh(R)
        X = symmetrize((V * np.maximum(w, 0)) @ V.T)
        correction = X - R
        Y_new = X.copy()
        Y_new[idx, idx] = 1.0
        step = np.linalg.norm(Y_new - Y)
        Y = Y_new
        if step < tol:
            converged = True
            break
    if not converged:
        warnings.warn(f"regularize_sdp did not converge in {max_iter} iterations",
                      NonConvergenceWarning)
    # the last PSD iterate, rescaled by congruence to an exact unit diagonal
    d = np.diag(X)
    if np.all(d > 0):
        s = 1 / np.sqrt(d)
        Y = symmetrize(X * np.outer(s, s))
        Y[idx, idx] = 1.0
    if return_info:
        return Y, {"iterations": it, "converged": converged}
    return Y


_REGULARIZE = {
    "Id": lambda A: np.asarray(A, dtype=float),
    "TIK": regularize_tikhonov,
    "THR": regularize_threshold,
    "SDP": regularize_sdp,
}


# --------------------------------------------------------------------------
# strategies


class Strategy(NamedTuple):
    r1: str
    m: str
    r2: str

    def __str__(self):
        return f"{self.r1}-{self.m}-{self.r2}"

    @classmethod
    def parse(cls, token: str) -> "Strategy":
        parts = token.strip().split("-")
        if len(parts) != 3:
            raise ValueError(f"strategy token must look like R1-M-R2, got {token!r}")
        s = cls(*parts)
        s.validate()
        return s

    def validate(self):
        if self.r1 not in REGULARIZERS or self.r2 not in REGULARIZERS:
            raise ValueError(f"unknown regularizer in {self}")
        if self.m not in MITIGATIONS:
            raise ValueError(f"unknown mitigation in {self}")


def canonical(s: Strategy) -> Strategy:
    """Representative of the class of triples computing the same function.

    * SDP output is PSD with unit diagonal, so any mitigation after it
      estimates survival 1 and is dropped.
    * Without mitigation, a regularizer applied to an already PSD matrix is
      the identity unless it is SDP (which also fixes the diagonal); a lone
      regularizer is written in first position.
    """
    s = Strategy(*s)
    s.validate()
    r1, m, r2 = s
    if r1 == "SDP":
        m = "Id"
    if m != "Id":
        return Strategy(r1, m, r2)
    if r1 == "Id":
        return Strategy(r2, "Id", "Id")
    if r1 == "SDP" or r2 in ("Id",) + _PSD_REGULARIZERS:
        return Strategy(r1, "Id", "Id")
    return Strategy(r1, "Id", r2)


def enumerate_strategies() -> list[Strategy]:
    """The distinct, irreducible strategies in a fixed order."""
    seen = []
    for triple in itertools.product(REGULARIZERS, MITIGATIONS, REGULARIZERS):
        c = canonical(Strategy(*triple))
        if c not in seen:
            seen.append(c)
    return seen


def apply_strategy(K_dev, strategy, num_qubits: int, n_mean: int | None = None) -> KernelMatrix:
    """Run ``R1``, then ``M``, then ``R2`` on a kernel matrix."""
    s = Strategy.parse(strategy) if isinstance(strategy, str) else Strategy(*strategy)
    s.validate()
    diag_ok = not isinstance(K_dev, KernelMatrix) or K_dev.diagonal_measured
    if s.m != "Id" and not diag_ok:
        raise MitigationInfeasible(f"{s} needs measured diagonal entries")
    A = _REGULARIZE[s.r1](np.asarray(K_dev, dtype=float))
    if s.m != "Id":
        est = estimate_survival(A, s.m, num_qubits, n_mean)
        A = mitigate(A, est, num_qubits)
    A = _REGULARIZE[s.r2](A)
    meta = {"strategy": str(s), "num_qubits": num_qubits}
    if isinstance(K_dev, KernelMatrix):
        meta = {**K_dev.meta, **meta, "source_provenance": K_dev.provenance}
        shots = K_dev.shots
    else:
        shots = 0
    n_invalid = int(np.sum((A < 0) | (A > 1)))
    meta["n_entries_outside_unit_interval"] = n_invalid
    return KernelMatrix(symmetrize(A), "POST", shots, diag_ok, meta)


def relative_improvement(K_post, K_raw, K_exact) -> float:
    """Alignment gain with the exact matrix, relative to the raw deficit."""
    a_raw = matrix_alignment(K_raw, K_exact)
    if a_raw >= 1.0:
        raise ZeroDivisionError("raw matrix is already perfectly aligned")
    return (matrix_alignment(K_post, K_exact) - a_raw) / (1 - a_raw)


@dataclass
class StrategyResult:
    strategy: Strategy
    alignment: float
    q: float
    feasible: bool
    reason: str = ""


def rank_strategies(K_dev, K_exact, num_qubits: int, strategies=None,
                    n_mean: int | None = None) -> list[StrategyResult]:
    """Score every strategy by alignment with the exact matrix, best first.

    Infeasible strategies are appended after the feasible ones with the
    failure reason.
    """
    strategies = enumerate_strategies() if strategies is None else strategies
    K_raw = np.asarray(K_dev, dtype=float)
    a_raw = matrix_alignment(K_raw, K_exact)
    good, bad = [], []
    for s in strategies:
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", NonConvergenceWarning)
                post = apply_strategy(K_dev, s, num_qubits, n_mean)
            a = matrix_alignment(post, K_exact)
        except (MitigationInfeasible, NonConvergence, ValueError, np.linalg.LinAlgError) as exc:
            bad.append(StrategyResult(Strategy(*s), math.nan, math.nan, False, str(exc)))
            continue
        q = (a - a_raw) / (1 - a_raw) if a_raw < 1 else math.nan
        good.append(StrategyResult(Strategy(*s), a, q, True))
    good.sort(key=lambda r: -r.alignment)
    return good + bad
