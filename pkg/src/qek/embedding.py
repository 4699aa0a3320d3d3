"""Data re-uploading embedding ansatz.

Each of the ``L`` blocks applies, on every qubit ``q``: H, RZ(feature),
RY(theta), followed by a ring of CRZ(theta) gates where qubit ``q``
controls qubit ``(q + 1) % N``. Features are consumed cyclically across
all RZ gates of all blocks. Parameters are consumed per block as ``N`` RY
angles followed by ``N`` CRZ angles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .simulator import Circuit, Gate, adjoint, adjoint_ops, run_pure

__all__ = [
    "AnsatzShape",
    "adjoint",
    "build_embedding",
    "embedding_ops",
    "embedded_states",
    "random_parameters",
]


@dataclass(frozen=True)
class AnsatzShape:
    num_qubits: int
    num_layers: int
    num_features: int = 2

    def __post_init__(self):
        if self.num_qubits < 2:
            raise ValueError("the CRZ ring needs at least 2 qubits")
        if self.num_layers < 1:
            raise ValueError("need at least one layer")
        if self.num_features < 1:
            raise ValueError("need at least one feature")

    @property
    def num_params(self) -> int:
        return 2 * self.num_qubits * self.num_layers


def random_parameters(shape: AnsatzShape, rng) -> np.ndarray:
    """Parameters drawn uniformly from ``[0, 2*pi)``."""
    rng = np.random.default_rng(rng)
    return rng.uniform(0, 2 * np.pi, shape.num_params)


def _check_inputs(X: np.ndarray, thetas: np.ndarray, shape: AnsatzShape):
    if X.shape[-1] != shape.num_features:
        raise ValueError(f"expected {shape.num_features} features, got {X.shape[-1]}")
    if thetas.shape[-1] != shape.num_params:
        raise ValueError(
            f"expected {shape.num_params} parameters (2*N*L), got {thetas.shape[-1]}"
        )
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(thetas))):
        raise ValueError("features and parameters must be finite")


def embedding_ops(X: np.ndarray, thetas: np.ndarray, shape: AnsatzShape):
    """Batched gate list for features ``X`` (B, m) and parameters (B, 2NL).

    Either argument may have a leading axis of length 1, which is
    broadcast against the other.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    _check_inputs(X, thetas, shape)
    batch = max(len(X), len(thetas))
    X = np.broadcast_to(X, (batch, X.shape[1]))
    thetas = np.broadcast_to(thetas, (batch, thetas.shape[1]))

    n, m = shape.num_qubits, shape.num_features
    ops = []
    feature = 0
    for layer in range(shape.num_layers):
        offset = 2 * n * layer
        for q in range(n):
            ops.append(("H", q, None, None))
        for q in range(n):
            ops.append(("RZ", q, None, X[:, feature % m]))
            feature += 1
        for q in range(n):
            ops.append(("RY", q, None, thetas[:, offset + q]))
        for q in range(n):
            ops.append(("CRZ", (q + 1) % n, q, thetas[:, offset + n + q]))
    return ops, batch


def build_embedding(x, theta, shape: AnsatzShape) -> Circuit:
    """Embedding circuit ``U(x)`` for a single feature vector."""
    x = np.asarray(x, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if x.ndim != 1 or theta.ndim != 1:
        raise ValueError("build_embedding takes a single feature vector and parameter vector")
    ops, _ = embedding_ops(x[None], theta[None], shape)
    gates = []
    for kind, target, control, angles in ops:
        angle = None if angles is None else float(angles[0])
        gates.append(Gate(kind, target, control, angle))
    return Circuit(shape.num_qubits, tuple(gates))


def embedded_states(X, thetas, shape: AnsatzShape) -> np.ndarray:
    """Statevectors ``U(x)|0>`` for a batch; shape ``(B, 2**N)``."""
    ops, batch = embedding_ops(X, thetas, shape)
    return run_pure(shape.num_qubits, ops, batch)


def overlap_ops(X, Xp, thetas, shape: AnsatzShape):
    """Batched ``U(x)`` followed by ``U(x')^dagger``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Xp = np.atleast_2d(np.asarray(Xp, dtype=float))
    ops_a, batch_a = embedding_ops(X, thetas, shape)
    ops_b, batch_b = embedding_ops(Xp, thetas, shape)
    batch = max(batch_a, batch_b)
    ops = [_broadcast_op(op, batch) for op in ops_a + adjoint_ops(ops_b)]
    return ops, batch


def _broadcast_op(op, batch):
    kind, target, control, angles = op
    if angles is not None and len(angles) != batch:
        angles = np.broadcast_to(angles, (batch,))
    return kind, target, control, angles
