"""Dense quantum states, gates and the two noise models.

Qubit 0 is the least significant bit of the amplitude index.  For density
operators on a tensor product ``A (x) B`` the first factor is the most
significant block, matching ``np.kron(a, b)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .. import _accel
from ..errors import QBDLError

NORM_TOL = 1e-10


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and n & (n - 1) == 0


@dataclass(frozen=True)
class QuantumState:
    """Normalized statevector on ``num_qubits`` qubits."""

    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.ascontiguousarray(self.amplitudes, dtype=np.complex128).reshape(-1)
        if not _is_power_of_two(amps.shape[0]):
            raise QBDLError("bad-dimension", f"length {amps.shape[0]} is not a power of two")
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > NORM_TOL:
            raise QBDLError("not-normalized", f"norm {norm!r}")
        object.__setattr__(self, "amplitudes", amps)

    @property
    def num_qubits(self) -> int:
        return self.amplitudes.shape[0].bit_length() - 1

    @classmethod
    def zero(cls, num_qubits: int) -> "QuantumState":
        return cls.basis(num_qubits, 0)

    @classmethod
    def basis(cls, num_qubits: int, index: int) -> "QuantumState":
        amps = np.zeros(1 << num_qubits, dtype=np.complex128)
        amps[index] = 1.0
        return cls(amps)

    @classmethod
    def from_vector(cls, vec) -> "QuantumState":
        """Normalize ``vec`` and wrap it; raises on a zero vector."""
        vec = np.asarray(vec, dtype=np.complex128).reshape(-1)
        norm = np.linalg.norm(vec)
        if norm == 0:
            raise QBDLError("zero-vector")
        return cls(vec / norm)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def density(self) -> "DensityOp":
        return DensityOp(np.outer(self.amplitudes, self.amplitudes.conj()))


@dataclass(frozen=True)
class DensityOp:
    """Hermitian, unit-trace, positive semidefinite operator."""

    matrix: np.ndarray

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=np.complex128)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise QBDLError("shape-mismatch", f"density operator must be square, got {mat.shape}")
        if np.abs(mat - mat.conj().T).max() > 1e-10:
            raise QBDLError("not-hermitian")
        tr = np.trace(mat).real
        if abs(tr - 1.0) > 1e-10:
            raise QBDLError("bad-trace", f"trace {tr!r}")
        if np.linalg.eigvalsh(mat).min() < -1e-9:
            raise QBDLError("not-psd")
        object.__setattr__(self, "matrix", mat)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class GateOp:
    """A unitary on an ordered tuple of target qubits.

    ``targets[0]`` is the least significant bit of the gate's local index, so a
    controlled gate built as ``block_diag(I, U)`` has its control last.
    """

    unitary: np.ndarray
    targets: tuple
    label: str = "U"

    def __post_init__(self):
        u = np.ascontiguousarray(self.unitary, dtype=np.complex128)
        targets = tuple(int(t) for t in self.targets)
        if u.shape != (1 << len(targets), 1 << len(targets)):
            raise QBDLError("shape-mismatch", f"{u.shape} does not match {len(targets)} targets")
        if len(set(targets)) != len(targets) or min(targets) < 0:
            raise QBDLError("bad-targets", str(targets))
        if np.abs(u.conj().T @ u - np.eye(u.shape[0])).max() > 1e-10:
            raise QBDLError("not-unitary", self.label)
        if any(c.isspace() for c in self.label):
            raise QBDLError("bad-label", repr(self.label))
        object.__setattr__(self, "unitary", u)
        object.__setattr__(self, "targets", targets)


@dataclass(frozen=True)
class NoiseSpec:
    """Probabilities of a Pauli-X flip after gates and of a readout inversion.

    ``scope`` selects which qubits the gate noise can hit after each gate:
    ``"touched"`` (the gate's targets) or ``"all"``.
    """

    gate_noise_p: float = 0.0
    meas_noise_p: float = 0.0
    scope: str = field(default="touched")

    def __post_init__(self):
        for name in ("gate_noise_p", "meas_noise_p"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise QBDLError("bad-probability", f"{name}={p!r}")
        if self.scope not in ("touched", "all"):
            raise QBDLError("bad-scope", self.scope)

    @property
    def is_noiseless(self) -> bool:
        return self.gate_noise_p == 0.0 and self.meas_noise_p == 0.0


def _check_qubits(n: int, qubits: Sequence[int]):
    for q in qubits:
        if not 0 <= q < n:
            raise QBDLError("bad-targets", f"qubit {q} out of range for {n} qubits")


def apply_gate(state: QuantumState, gate: GateOp) -> QuantumState:
    _check_qubits(state.num_qubits, gate.targets)
    return QuantumState(_accel.apply_matrix(state.amplitudes, gate.unitary, gate.targets))


def apply_gate_noise(state: QuantumState, touched_qubits, p: float, rng) -> QuantumState:
    """Flip each of ``touched_qubits`` independently with probability ``p``."""
    if not 0.0 <= p <= 1.0:
        raise QBDLError("bad-probability", repr(p))
    _check_qubits(state.num_qubits, touched_qubits)
    amps = state.amplitudes
    if p > 0.0:
        for q in touched_qubits:
            if rng.random() < p:
                amps = _accel.apply_x(amps, q)
    return QuantumState(amps)


def measure(state: QuantumState, qubit: int, meas_noise_p: float, rng):
    """Projective Z measurement of one qubit.

    The state collapses onto the true outcome; the returned (recorded) bit is
    inverted with probability ``meas_noise_p``.  Returns ``(bit, new_state)``.
    """
    _check_qubits(state.num_qubits, [qubit])
    amps, true_bit = _measure_raw(state.amplitudes, qubit, rng)
    bit = true_bit
    if meas_noise_p > 0.0 and rng.random() < meas_noise_p:
        bit ^= 1
    return bit, QuantumState(amps)


def _measure_raw(amps, qubit, rng):
    p1 = min(max(_accel.prob_one(amps, qubit), 0.0), 1.0)
    outcome = 1 if rng.random() < p1 else 0
    prob = p1 if outcome else 1.0 - p1
    return _accel.collapse(amps, qubit, outcome, prob), outcome


def partial_trace(rho, dims: Sequence[int], keep: Sequence[int]):
    """Trace out every subsystem not listed in ``keep``.

    ``dims`` lists subsystem dimensions in tensor (most significant first)
    order.  Returns a :class:`DensityOp` when given one, else a plain matrix.
    """
    as_op = isinstance(rho, DensityOp)
    mat = rho.matrix if as_op else np.asarray(rho)
    dims = [int(d) for d in dims]
    if int(np.prod(dims)) != mat.shape[0] or mat.shape[0] != mat.shape[1]:
        raise QBDLError("bad-partition", f"dims {dims} vs shape {mat.shape}")
    keep = sorted(set(keep))
    if any(not 0 <= k < len(dims) for k in keep):
        raise QBDLError("bad-partition", f"keep {keep}")
    n = len(dims)
    letters = "abcdefghijklmnopqrstuvwxyz"
    if 2 * n > len(letters) + 26:
        raise QBDLError("bad-partition", "too many subsystems")
    letters += letters.upper()
    row = list(letters[:n])
    col = [letters[n + i] if i in keep else row[i] for i in range(n)]
    out_idx = "".join(row[i] for i in keep) + "".join(col[i] for i in keep)
    red = np.einsum("".join(row) + "".join(col) + "->" + out_idx, mat.reshape(dims + dims))
    dk = int(np.prod([dims[i] for i in keep])) if keep else 1
    red = red.reshape(dk, dk)
    return DensityOp(red) if as_op else red


def reduced_density(state: QuantumState, qubits: Sequence[int]) -> np.ndarray:
    """Reduced density matrix of ``qubits`` (local index: ``qubits[0]`` is LSB)."""
    n = state.num_qubits
    _check_qubits(n, qubits)
    psi = state.amplitudes.reshape((2,) * n)
    axes = [n - 1 - q for q in reversed(qubits)]
    rest = [a for a in range(n) if a not in axes]
    mat = np.transpose(psi, axes + rest).reshape(1 << len(qubits), -1)
    return mat @ mat.conj().T


def fidelity(a: QuantumState, b: QuantumState) -> float:
    """Squared overlap ``|<a|b>|^2`` of two pure states."""
    if a.amplitudes.shape != b.amplitudes.shape:
        raise QBDLError("shape-mismatch", f"{a.amplitudes.shape} vs {b.amplitudes.shape}")
    return float(min(abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2, 1.0))


def register_fidelity(state: QuantumState, qubits: Sequence[int], target) -> float:
    """``<x|rho|x>`` where rho is the reduced state of ``qubits`` and x = target."""
    x = np.asarray(target, dtype=np.complex128)
    x = x / np.linalg.norm(x)
    rho = reduced_density(state, qubits)
    return float(min(max(np.vdot(x, rho @ x).real, 0.0), 1.0))


def trace_distance(a, b) -> float:
    ma = a.matrix if isinstance(a, DensityOp) else np.asarray(a)
    mb = b.matrix if isinstance(b, DensityOp) else np.asarray(b)
    diff = ma - mb
    diff = (diff + diff.conj().T) / 2
    return float(0.5 * np.abs(np.linalg.eigvalsh(diff)).sum())


def expm_hermitian(h, t: float) -> np.ndarray:
    """``exp(-i h t)`` through the eigendecomposition of Hermitian ``h``."""
    h = np.asarray(h, dtype=np.complex128)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise QBDLError("shape-mismatch", str(h.shape))
    if np.abs(h - h.conj().T).max() > 1e-10:
        raise QBDLError("not-hermitian")
    w, v = np.linalg.eigh((h + h.conj().T) / 2)
    return (v * np.exp(-1j * w * t)) @ v.conj().T
