"""Circuits, a small gate library, noisy trajectory execution and text I/O.

Text format (one op per line, ``#`` starts a comment)::

    QUBITS 4
    REGISTER clock 1,2
    H 1
    CRY(1.0471975512) 1,3 | 1,0 0,0 0,0 0,0 ...
    MEASURE 3 anc

A gate line is ``<label> <comma-separated targets>`` optionally followed by
``|`` and the ``2^k x 2^k`` matrix row-major as ``real,imag`` pairs.  The
matrix may be omitted for the fixed gates in :data:`FIXED_GATES`.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .. import _accel
from ..errors import QBDLError
from .state import GateOp, NoiseSpec, QuantumState, _measure_raw

_SQ2 = 1 / np.sqrt(2)

FIXED_GATES = {
    "I": np.eye(2),
    "X": np.array([[0, 1], [1, 0]]),
    "Y": np.array([[0, -1j], [1j, 0]]),
    "Z": np.diag([1, -1]),
    "H": np.array([[1, 1], [1, -1]]) * _SQ2,
    "S": np.diag([1, 1j]),
    "SDG": np.diag([1, -1j]),
    "T": np.diag([1, np.exp(1j * np.pi / 4)]),
    "TDG": np.diag([1, np.exp(-1j * np.pi / 4)]),
    # control is the second target (local MSB)
    "CNOT": np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]]),
    "CZ": np.diag([1, 1, 1, -1]),
    "SWAP": np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]]),
}


def _fixed(label, *targets):
    return GateOp(FIXED_GATES[label], targets, label)


def h(q):
    return _fixed("H", q)


def x(q):
    return _fixed("X", q)


def t_gate(q):
    return _fixed("T", q)


def tdg(q):
    return _fixed("TDG", q)


def cnot(control, target):
    return _fixed("CNOT", target, control)


def swap(a, b):
    return _fixed("SWAP", a, b)


def ry_matrix(theta):
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=np.complex128)


def rx_matrix(theta):
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]])


def ry(theta, q):
    return GateOp(ry_matrix(theta), (q,), f"RY({theta:.12g})")


def phase(phi, q):
    return GateOp(np.diag([1, np.exp(1j * phi)]), (q,), f"P({phi:.12g})")


def controlled_matrix(u):
    u = np.asarray(u, dtype=np.complex128)
    d = u.shape[0]
    out = np.eye(2 * d, dtype=np.complex128)
    out[d:, d:] = u
    return out


def controlled(u, control, targets, label="CU"):
    """``u`` on ``targets`` conditioned on ``control`` being 1."""
    return GateOp(controlled_matrix(u), tuple(targets) + (control,), label)


def cphase(phi, a, b):
    return GateOp(np.diag([1, 1, 1, np.exp(1j * phi)]), (a, b), f"CP({phi:.12g})")


def toffoli(c1, c2, target) -> list:
    """Toffoli as 15 one- and two-qubit gates (6 CNOT, 7 T/T-dagger, 2 H)."""
    return [
        h(target),
        cnot(c2, target), tdg(target),
        cnot(c1, target), t_gate(target),
        cnot(c2, target), tdg(target),
        cnot(c1, target), t_gate(c2), t_gate(target),
        h(target),
        cnot(c1, c2), t_gate(c1), tdg(c2),
        cnot(c1, c2),
    ]


def cswap(control, a, b) -> list:
    """Fredkin gate as CNOT - Toffoli - CNOT in one- and two-qubit gates."""
    return [cnot(b, a), *toffoli(control, a, b), cnot(b, a)]


@dataclass(frozen=True)
class Measure:
    qubit: int
    key: str


@dataclass
class Circuit:
    """Ordered gate applications and measurements on ``num_qubits`` qubits."""

    num_qubits: int
    ops: list = field(default_factory=list)
    registers: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 1 <= self.num_qubits <= 14:
            raise QBDLError("too-many-qubits", f"{self.num_qubits} (supported: 1..14)")
        self._compiled = None

    def append(self, op):
        targets = op.targets if isinstance(op, GateOp) else (op.qubit,)
        if any(not 0 <= q < self.num_qubits for q in targets):
            raise QBDLError("bad-targets", f"{targets} for {self.num_qubits} qubits")
        self.ops.append(op)
        self._compiled = None
        return self

    def extend(self, ops):
        for op in ops:
            self.append(op)
        return self

    def measure(self, qubit, key):
        return self.append(Measure(qubit, key))

    @property
    def gates(self) -> list:
        return [op for op in self.ops if isinstance(op, GateOp)]

    @property
    def measurements(self) -> list:
        return [op for op in self.ops if isinstance(op, Measure)]

    @property
    def gate_count(self) -> int:
        return len(self.gates)

    def inverse_gates(self) -> list:
        """Adjoints of the gates, in reverse order (measurements rejected)."""
        if self.measurements:
            raise QBDLError("not-invertible", "circuit contains measurements")
        return [GateOp(g.unitary.conj().T, g.targets, _dagger(g.label)) for g in reversed(self.gates)]

    def compiled(self):
        if self._compiled is None:
            comp = []
            for op in self.ops:
                if isinstance(op, GateOp):
                    comp.append((0, op.unitary, np.asarray(op.targets, dtype=np.int64)))
                else:
                    comp.append((1, op.qubit, op.key))
            self._compiled = comp
        return self._compiled

    # -- text I/O ----------------------------------------------------------

    def dumps(self) -> str:
        lines = [f"QUBITS {self.num_qubits}"]
        for name, qubits in self.registers.items():
            lines.append(f"REGISTER {name} {','.join(str(q) for q in qubits)}")
        for op in self.ops:
            if isinstance(op, Measure):
                lines.append(f"MEASURE {op.qubit} {op.key}")
                continue
            tgt = ",".join(str(t) for t in op.targets)
            fixed = FIXED_GATES.get(op.label)
            if fixed is not None and fixed.shape == op.unitary.shape and np.allclose(fixed, op.unitary, atol=1e-15):
                lines.append(f"{op.label} {tgt}")
            else:
                entries = " ".join(f"{float(z.real)!r},{float(z.imag)!r}" for z in op.unitary.reshape(-1))
                lines.append(f"{op.label} {tgt} | {entries}")
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "Circuit":
        circ = None
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            head, _, matrix = line.partition("|")
            parts = head.split()
            try:
                if parts[0] == "QUBITS":
                    circ = cls(int(parts[1]))
                elif circ is None:
                    raise QBDLError("bad-circuit-text", f"line {lineno}: QUBITS header missing")
                elif parts[0] == "REGISTER":
                    circ.registers[parts[1]] = tuple(int(q) for q in parts[2].split(","))
                elif parts[0] == "MEASURE":
                    circ.measure(int(parts[1]), parts[2])
                else:
                    label, targets = parts[0], tuple(int(t) for t in parts[1].split(","))
                    if matrix.strip():
                        vals = [complex(float(a), float(b)) for a, b in (e.split(",") for e in matrix.split())]
                        dim = 1 << len(targets)
                        u = np.array(vals, dtype=np.complex128).reshape(dim, dim)
                    elif label in FIXED_GATES:
                        u = FIXED_GATES[label]
                    else:
                        raise QBDLError("bad-circuit-text", f"line {lineno}: no matrix for {label}")
                    circ.append(GateOp(u, targets, label))
            except (IndexError, ValueError) as exc:
                if isinstance(exc, QBDLError):
                    raise
                raise QBDLError("bad-circuit-text", f"line {lineno}: {raw!r}") from exc
        if circ is None:
            raise QBDLError("bad-circuit-text", "empty input")
        return circ


def _dagger(label):
    return label[:-3] if label.endswith("DAG") else label + "DAG"


@dataclass
class RunResult:
    state: QuantumState
    recorded: dict
    true_bits: dict


def run_circuit(circuit: Circuit, noise: NoiseSpec = NoiseSpec(), rng=None, initial=None) -> RunResult:
    """Execute one noisy trajectory of ``circuit``.

    After every gate an X is applied with probability ``noise.gate_noise_p``
    to each touched qubit (or every qubit when ``noise.scope == "all"``).
    Measurements collapse on the true outcome and record an inverted bit with
    probability ``noise.meas_noise_p``.
    """
    if rng is None:
        rng = np.random.default_rng()
    n = circuit.num_qubits
    if initial is None:
        amps = np.zeros(1 << n, dtype=np.complex128)
        amps[0] = 1.0
    else:
        amps = initial.amplitudes if isinstance(initial, QuantumState) else np.asarray(initial, dtype=np.complex128)
        if amps.shape[0] != 1 << n:
            raise QBDLError("shape-mismatch", "initial state does not match circuit width")
    pg, pm = noise.gate_noise_p, noise.meas_noise_p
    all_qubits = range(n)
    recorded, true_bits = {}, {}
    apply_matrix, apply_x = _accel.apply_matrix, _accel.apply_x
    for kind, a, b in circuit.compiled():
        if kind == 0:
            amps = apply_matrix(amps, a, b)
            if pg > 0.0:
                for q in (all_qubits if noise.scope == "all" else b):
                    if rng.random() < pg:
                        amps = apply_x(amps, int(q))
        else:
            amps, bit = _measure_raw(amps, a, rng)
            true_bits[b] = bit
            if pm > 0.0 and rng.random() < pm:
                bit ^= 1
            recorded[b] = bit
    # renormalize against drift accumulated over long gate sequences
    amps = amps / np.linalg.norm(amps)
    return RunResult(QuantumState(amps), recorded, true_bits)


def statevector(circuit: Circuit, initial=None) -> QuantumState:
    """Noise-free final state of a measurement-free circuit."""
    if circuit.measurements:
        raise QBDLError("has-measurements", "use run_circuit for circuits with measurements")
    return run_circuit(circuit, NoiseSpec(), np.random.default_rng(0), initial).state


def gates_on(num_qubits: int, gates: Sequence[GateOp]) -> Circuit:
    return Circuit(num_qubits).extend(gates)
