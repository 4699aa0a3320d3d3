"""Dense gate-level simulator for the H / RZ / RY / CRZ gate set.

States are plain numpy arrays. Qubit 0 is the most significant bit of the
computational-basis index, so amplitude ``0`` is ``|0...0>``.

Internally every routine works on a *batch* of circuits sharing one gate
layout but carrying per-circuit angles. A gate in batched form is a tuple
``(kind, target, control, angles)`` with ``angles`` of shape ``(B,)`` (or
``None`` for H). :class:`Circuit` objects are lowered to a batch of one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .exceptions import DimensionError

MAX_QUBITS_PURE = 12
MAX_QUBITS_MIXED = 7

GATE_KINDS = ("H", "RZ", "RY", "CRZ")

_HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)


@dataclass(frozen=True)
class Gate:
    kind: str
    target: int
    control: int | None = None
    angle: float | None = None

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if self.kind == "H":
            if self.angle is not None:
                raise ValueError("H takes no angle")
        else:
            if self.angle is None or not math.isfinite(self.angle):
                raise ValueError(f"{self.kind} needs a finite angle, got {self.angle!r}")
        if self.kind == "CRZ":
            if self.control is None:
                raise ValueError("CRZ needs a control qubit")
            if self.control == self.target:
                raise ValueError("control and target must differ")
        elif self.control is not None:
            raise ValueError(f"{self.kind} is a single-qubit gate")

    @property
    def qubits(self) -> tuple[int, ...]:
        if self.control is None:
            return (self.target,)
        return (self.control, self.target)

    def adjoint(self) -> "Gate":
        if self.kind == "H":
            return self
        return Gate(self.kind, self.target, self.control, -self.angle)


@dataclass(frozen=True)
class Circuit:
    num_qubits: int
    gates: tuple[Gate, ...] = ()

    def __post_init__(self):
        if not 1 <= self.num_qubits <= MAX_QUBITS_PURE:
            raise DimensionError(
                f"num_qubits must be in [1, {MAX_QUBITS_PURE}], got {self.num_qubits}"
            )
        object.__setattr__(self, "gates", tuple(self.gates))
        for g in self.gates:
            if any(q < 0 or q >= self.num_qubits for q in g.qubits):
                raise ValueError(f"gate {g} addresses a qubit outside 0..{self.num_qubits - 1}")

    def __add__(self, other: "Circuit") -> "Circuit":
        if other.num_qubits != self.num_qubits:
            raise ValueError("cannot concatenate circuits of different width")
        return Circuit(self.num_qubits, self.gates + other.gates)

    def __len__(self):
        return len(self.gates)

    def adjoint(self) -> "Circuit":
        return Circuit(self.num_qubits, tuple(g.adjoint() for g in reversed(self.gates)))


def adjoint(circuit: Circuit) -> Circuit:
    """Reverse the gate order and negate every rotation angle."""
    return circuit.adjoint()


@dataclass(frozen=True)
class NoiseModel:
    """Local depolarizing noise with gate-dependent survival probability.

    ``base_survival`` is the survival probability of a full ``2*pi``
    rotation; shorter rotations interpolate linearly towards 1 and the
    Hadamard gets ``(1 + base_survival) / 2``.
    """

    base_survival: float = 1.0
    enabled: bool = True

    def __post_init__(self):
        if not 0.0 <= self.base_survival <= 1.0:
            raise ValueError(f"base_survival must lie in [0, 1], got {self.base_survival}")

    def survival(self, kind: str, angles: np.ndarray | float | None) -> np.ndarray | float:
        """Survival probability of the channel following a gate."""
        lam0 = self.base_survival if self.enabled else 1.0
        if kind == "H":
            return (1.0 + lam0) / 2.0
        frac = np.mod(np.abs(angles), 2 * np.pi) / (2 * np.pi)
        return (1.0 - frac) + lam0 * frac


# --------------------------------------------------------------------------
# batched engine


def _ops_from_circuit(circuit: Circuit):
    ops = []
    for g in circuit.gates:
        angles = None if g.angle is None else np.array([g.angle], dtype=float)
        ops.append((g.kind, g.target, g.control, angles))
    return ops


def adjoint_ops(ops):
    out = []
    for kind, target, control, angles in reversed(ops):
        out.append((kind, target, control, None if angles is None else -angles))
    return out


def _axis_shape(batch: int, n_axes: int, axes: Sequence[int]) -> list[int]:
    shape = [batch] + [1] * n_axes
    for a in axes:
        shape[1 + a] = 2
    return shape


def _single_qubit_matrices(kind: str, angles) -> np.ndarray:
    if kind == "H":
        return _HADAMARD[None]
    half = angles / 2
    c, s = np.cos(half), np.sin(half)
    m = np.zeros((len(angles), 2, 2), dtype=complex)
    m[:, 0, 0] = c
    m[:, 0, 1] = -s
    m[:, 1, 0] = s
    m[:, 1, 1] = c
    return m


def _diagonal(kind: str, angles, batch: int, n_axes: int, control, target) -> np.ndarray:
    """Broadcastable diagonal of an RZ or CRZ gate."""
    phase = np.exp(-0.5j * np.asarray(angles))
    if kind == "RZ":
        d = np.stack([phase, np.conj(phase)], axis=-1)
        return d.reshape(_axis_shape(len(d), n_axes, [target]))
    d = np.ones((len(phase), 2, 2), dtype=complex)
    d[:, 1, 0] = phase
    d[:, 1, 1] = np.conj(phase)
    # axes must appear in increasing order in the reshaped array
    if control > target:
        d = d.transpose(0, 2, 1)
    return d.reshape(_axis_shape(len(d), n_axes, sorted((control, target))))


def _apply_matrix(state: np.ndarray, mats: np.ndarray, axis: int) -> np.ndarray:
    s = np.moveaxis(state, axis, 1)
    s = np.einsum("bij,bj...->bi...", mats, s)
    return np.moveaxis(s, 1, axis)


def _check_batch(ops, batch):
    for _, _, _, angles in ops:
        if angles is not None and len(angles) != batch:
            raise ValueError("all gate angle arrays must share the batch size")


def run_pure(num_qubits: int, ops, batch: int = 1) -> np.ndarray:
    """Evolve ``|0...0>`` through batched ops; returns shape ``(B, 2**N)``."""
    if not 1 <= num_qubits <= MAX_QUBITS_PURE:
        raise DimensionError(f"statevector simulation supports at most {MAX_QUBITS_PURE} qubits")
    _check_batch(ops, batch)
    n = num_qubits
    state = np.zeros((batch,) + (2,) * n, dtype=complex)
    state[(slice(None),) + (0,) * n] = 1.0
    for kind, target, control, angles in ops:
        if kind in ("H", "RY"):
            state = _apply_matrix(state, _single_qubit_matrices(kind, angles), 1 + target)
        else:
            state = state * _diagonal(kind, angles, batch, n, control, target)
    return state.reshape(batch, 2**n)


def _depolarize_qubit(rho: np.ndarray, n: int, qubit: int, lam) -> np.ndarray:
    lam = np.asarray(lam, dtype=float)
    s = np.moveaxis(rho, (1 + qubit, 1 + n + qubit), (1, 2))
    tr = s[:, 0, 0] + s[:, 1, 1]
    lam_b = lam.reshape((-1,) + (1,) * (s.ndim - 1))
    out = lam_b * s
    mix = ((1.0 - lam).reshape((-1,) + (1,) * (tr.ndim - 1)) / 2.0) * tr
    out[:, 0, 0] += mix
    out[:, 1, 1] += mix
    return np.moveaxis(out, (1, 2), (1 + qubit, 1 + n + qubit))


def run_mixed(num_qubits: int, ops, batch: int = 1, noise: NoiseModel | None = None) -> np.ndarray:
    """Density-matrix evolution with depolarizing channels after each gate.

    Returns an array of shape ``(B, 2**N, 2**N)``.
    """
    if not 1 <= num_qubits <= MAX_QUBITS_MIXED:
        raise DimensionError(
            f"density-matrix simulation supports at most {MAX_QUBITS_MIXED} qubits"
        )
    _check_batch(ops, batch)
    n = num_qubits
    rho = np.zeros((batch,) + (2,) * (2 * n), dtype=complex)
    rho[(slice(None),) + (0,) * (2 * n)] = 1.0
    for kind, target, control, angles in ops:
        if kind in ("H", "RY"):
            mats = _single_qubit_matrices(kind, angles)
            rho = _apply_matrix(rho, mats, 1 + target)
            rho = _apply_matrix(rho, np.conj(mats), 1 + n + target)
        else:
            d = _diagonal(kind, angles, batch, n, control, target)
            rho = rho * d.reshape(d.shape + (1,) * n)
            dc = np.conj(d).reshape((d.shape[0],) + (1,) * n + d.shape[1:])
            rho = rho * dc
        if noise is not None and noise.enabled:
            lam = noise.survival(kind, angles)
            lam = np.broadcast_to(np.asarray(lam, dtype=float), (batch,))
            qubits = (target,) if control is None else (control, target)
            for q in qubits:
                rho = _depolarize_qubit(rho, n, q, lam)
    return rho.reshape(batch, 2**n, 2**n)


# --------------------------------------------------------------------------
# single-circuit API


def simulate_pure(circuit: Circuit) -> np.ndarray:
    """Statevector ``U|0...0>`` of a circuit."""
    return run_pure(circuit.num_qubits, _ops_from_circuit(circuit))[0]


def simulate_noisy(circuit: Circuit, noise: NoiseModel) -> np.ndarray:
    """Density matrix of a circuit under local depolarizing noise.

    After every gate a single-qubit depolarizing channel acts on each qubit
    the gate touched. Idle qubits receive no noise.
    """
    if circuit.num_qubits > MAX_QUBITS_MIXED:
        raise DimensionError(
            f"density-matrix simulation supports at most {MAX_QUBITS_MIXED} qubits"
        )
    return run_mixed(circuit.num_qubits, _ops_from_circuit(circuit), noise=noise)[0]


def apply_depolarizing(rho: np.ndarray, lam: float) -> np.ndarray:
    """Global depolarizing channel ``lam * rho + (1 - lam) * I / 2**N``."""
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"survival probability must lie in [0, 1], got {lam}")
    rho = np.asarray(rho)
    dim = rho.shape[0]
    return lam * rho + (1.0 - lam) * np.eye(dim) / dim


def pure_density(psi: np.ndarray) -> np.ndarray:
    """Outer product ``|psi><psi|``."""
    psi = np.asarray(psi)
    return np.outer(psi, np.conj(psi))


def random_circuit(
    num_qubits: int, depth: int, rng: np.random.Generator, kinds: Iterable[str] = GATE_KINDS
) -> Circuit:
    """Random circuit with ``depth`` gates drawn from ``kinds``; used by tests."""
    kinds = [k for k in kinds if num_qubits > 1 or k != "CRZ"]
    gates = []
    for _ in range(depth):
        kind = kinds[rng.integers(len(kinds))]
        target = int(rng.integers(num_qubits))
        if kind == "H":
            gates.append(Gate("H", target))
            continue
        angle = float(rng.uniform(-2 * np.pi, 2 * np.pi))
        if kind == "CRZ":
            control = int((target + 1 + rng.integers(num_qubits - 1)) % num_qubits)
            gates.append(Gate("CRZ", target, control, angle))
        else:
            gates.append(Gate(kind, target, None, angle))
    return Circuit(num_qubits, tuple(gates))
