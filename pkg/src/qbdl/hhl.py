"""Quantum linear-systems (HHL) circuits, postselection statistics and the swap test.

Register layout of every inversion circuit built here: work qubits first
(``0..w-1``), then the clock register (clock qubit 0 is the least significant
phase bit), then a single rotation ancilla measured under key ``"anc"``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import QBDLError
from . import _accel
from .qsim.circuit import (
    Circuit,
    controlled,
    controlled_matrix,
    cnot,
    cphase,
    cswap,
    h,
    phase,
    run_circuit,
    rx_matrix,
    ry,
    ry_matrix,
    swap,
)
from .qsim.state import GateOp, NoiseSpec, QuantumState, expm_hermitian, fidelity

ANCILLA_KEY = "anc"
FLAG_KEY = "flag"

# A = 1/2 [[3, 1], [1, 3]], b = (1, 0); A^-1 b is proportional to (3, -1)
SPECIALIZED_A = np.array([[1.5, 0.5], [0.5, 1.5]])
SPECIALIZED_B = np.array([1.0, 0.0])
SPECIALIZED_SOLUTION = np.array([3.0, -1.0]) / math.sqrt(10.0)


@dataclass(frozen=True)
class HHLConfig:
    """Clock size, evolution time t0 and rotation constant C of an HHL circuit.

    Clock values below ``min_clock_value`` are left unrotated (they never
    postselect); value 0 is always skipped.
    """

    clock_bits: int
    evolution_time: float
    rotation_constant: float
    max_repetitions: int = 10_000
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    min_clock_value: int = 1

    def __post_init__(self):
        if self.clock_bits < 1:
            raise QBDLError("bad-config", "clock_bits must be >= 1")
        if not self.evolution_time > 0:
            raise QBDLError("bad-config", "evolution_time must be > 0")
        if self.max_repetitions < 1:
            raise QBDLError("bad-config", "max_repetitions must be >= 1")
        if not 1 <= self.min_clock_value < self.clock_size:
            raise QBDLError("bad-config", f"min_clock_value {self.min_clock_value} outside 1..{self.clock_size - 1}")
        limit = self.clock_eigenvalue(self.min_clock_value)
        if not 0 < self.rotation_constant <= limit * (1 + 1e-12):
            raise QBDLError("rotation-overflow",
                            f"C={self.rotation_constant!r} exceeds smallest rotated eigenvalue {limit!r}")

    @property
    def clock_size(self) -> int:
        return 1 << self.clock_bits

    @property
    def smallest_clock_eigenvalue(self) -> float:
        return 2 * math.pi / (self.evolution_time * self.clock_size)

    def clock_eigenvalue(self, k: int) -> float:
        """Eigenvalue encoded by clock value ``k``."""
        return k * self.smallest_clock_eigenvalue

    @classmethod
    def for_matrix(cls, a, clock_bits: int, **kwargs) -> "HHLConfig":
        """Derive t0, the low-clock filter and C from ``a``'s spectrum.

        The filter starts at the clock value just below lambda_min, and C is
        the eigenvalue that value encodes, so every rotation angle is valid.
        """
        eigs = np.linalg.eigvalsh(np.asarray(a))
        t0 = float(choose_evolution_time(eigs, clock_bits))
        size = 1 << clock_bits
        k_min = max(1, int(math.floor(eigs.min() * t0 * size / (2 * math.pi) + 1e-9)))
        c = k_min * 2 * math.pi / (t0 * size)
        return cls(clock_bits, t0, c, min_clock_value=k_min, **kwargs)


def choose_evolution_time(eigenvalues, clock_bits: int, tol: float = 1e-9) -> float:
    """Evolution time placing the eigenvalues on the clock grid when possible.

    Tries units ``lambda_min / j`` for ``j = 1, 2, ...`` and returns
    ``2 pi / (2^m unit)`` for the first unit under which every eigenvalue is
    an integer multiple no larger than ``2^m - 1``.  Otherwise falls back to
    ``0.9 * 2 pi / lambda_max`` so the top eigenvalue cannot wrap around.
    """
    eigs = np.asarray(eigenvalues, dtype=float)
    if eigs.min() <= 0:
        raise QBDLError("not-positive-definite", f"min eigenvalue {eigs.min()!r}")
    size = 1 << clock_bits
    for j in range(1, size):
        unit = eigs.min() / j
        ks = eigs / unit
        if np.all(np.abs(ks - np.round(ks)) <= tol * np.maximum(ks, 1.0)) and np.round(ks.max()) <= size - 1:
            return 2 * math.pi / (size * unit)
    return 0.9 * 2 * math.pi / eigs.max()


# -- building blocks ---------------------------------------------------------


def amplitude_encoding(vec, qubits) -> list:
    """Gates preparing the real vector ``vec`` (normalized) from ``|0...0>``.

    A tree of uniformly controlled RY rotations, one gate per qubit;
    ``qubits[0]`` carries the least significant index bit.
    """
    vec = np.asarray(vec)
    if np.iscomplexobj(vec):
        if np.abs(vec.imag).max() > 1e-12:
            raise QBDLError("complex-amplitudes", "amplitude encoding supports real vectors only")
        vec = vec.real
    vec = np.asarray(vec, dtype=float).reshape(-1)
    n = len(qubits)
    if vec.shape[0] != 1 << n:
        raise QBDLError("shape-mismatch", f"{vec.shape[0]} amplitudes for {n} qubits")
    norm = np.linalg.norm(vec)
    if norm == 0:
        raise QBDLError("zero-vector")
    vec = vec / norm
    gates = []
    for level in range(n):
        q = qubits[n - 1 - level]
        blocks = vec.reshape(1 << level, 2, -1)
        if blocks.shape[2] == 1:
            angles = 2 * np.arctan2(blocks[:, 1, 0], blocks[:, 0, 0])
        else:
            angles = 2 * np.arctan2(np.linalg.norm(blocks[:, 1, :], axis=1), np.linalg.norm(blocks[:, 0, :], axis=1))
        if level == 0:
            gates.append(ry(float(angles[0]), q))
            continue
        mat = np.zeros((2 << level, 2 << level), dtype=np.complex128)
        for p, ang in enumerate(angles):
            mat[2 * p:2 * p + 2, 2 * p:2 * p + 2] = ry_matrix(ang)
        controls = tuple(qubits[n - level:])
        gates.append(GateOp(mat, (q,) + controls, "UCRY"))
    return gates


def qft_gates(qubits) -> list:
    """Quantum Fourier transform ``|k> -> sum_j e^{2 pi i jk/M} |j> / sqrt(M)``."""
    m = len(qubits)
    gates = []
    for i in range(m - 1, -1, -1):
        gates.append(h(qubits[i]))
        for j in range(i - 1, -1, -1):
            gates.append(cphase(math.pi / (1 << (i - j)), qubits[j], qubits[i]))
    for i in range(m // 2):
        gates.append(swap(qubits[i], qubits[m - 1 - i]))
    return gates


def adjoint(gates) -> list:
    return Circuit(1 + max(max(g.targets) for g in gates)).extend(gates).inverse_gates()


def inverse_qft_gates(qubits) -> list:
    return adjoint(qft_gates(qubits))


def _qpe_gates(u, work, clock) -> list:
    gates = [h(c) for c in clock]
    power = np.asarray(u, dtype=np.complex128)
    for j, c in enumerate(clock):
        gates.append(controlled(power, c, work, f"CU^{1 << j}"))
        power = power @ power
    gates.extend(inverse_qft_gates(clock))
    return gates


def build_qpe(u, clock_bits: int) -> Circuit:
    """Phase estimation of ``u``: work qubits ``0..w-1``, clock after them.

    For an eigenvector with eigenvalue ``exp(2 pi i phi)`` the clock ends in
    ``|round(phi 2^m) mod 2^m>``.
    """
    u = np.asarray(u, dtype=np.complex128)
    if np.abs(u.conj().T @ u - np.eye(u.shape[0])).max() > 1e-10:
        raise QBDLError("not-unitary", "phase estimation input")
    w = u.shape[0].bit_length() - 1
    if u.shape[0] != 1 << w or clock_bits < 1:
        raise QBDLError("shape-mismatch", f"unitary of size {u.shape[0]}")
    work = tuple(range(w))
    clock = tuple(range(w, w + clock_bits))
    circ = Circuit(w + clock_bits, registers={"work": work, "clock": clock})
    return circ.extend(_qpe_gates(u, work, clock))


def _rotation_gate(angle, ancilla, clock, k, label):
    m = len(clock)
    mat = np.eye(2 << m, dtype=np.complex128)
    mat[2 * k:2 * k + 2, 2 * k:2 * k + 2] = ry_matrix(angle)
    return GateOp(mat, (ancilla,) + tuple(clock), label)


def build_hhl(a, b, cfg: HHLConfig) -> Circuit:
    """Full HHL: prepare |b>, phase-estimate e^{iA t0}, rotate, uncompute, measure.

    Conditioned on the ancilla reading 1 the work register holds a state
    proportional to ``A^-1 |b>`` (exactly so when A's eigenvalues lie on the
    clock grid).
    """
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise QBDLError("shape-mismatch", str(a.shape))
    if np.abs(a - a.conj().T).max() > 1e-10:
        raise QBDLError("not-hermitian")
    w = a.shape[0].bit_length() - 1
    if a.shape[0] != 1 << w:
        raise QBDLError("shape-mismatch", "matrix size must be a power of two")
    eigs = np.linalg.eigvalsh(a)
    if eigs.min() <= 0:
        raise QBDLError("not-positive-definite", f"min eigenvalue {eigs.min()!r}")
    if eigs.max() * cfg.evolution_time >= 2 * math.pi:
        raise QBDLError("phase-wraparound", f"lambda_max * t0 = {eigs.max() * cfg.evolution_time!r}")
    m = cfg.clock_bits
    work = tuple(range(w))
    clock = tuple(range(w, w + m))
    anc = w + m
    circ = Circuit(w + m + 1, registers={"work": work, "clock": clock, "ancilla": (anc,)})
    circ.extend(amplitude_encoding(b, work))
    u = expm_hermitian(a, -cfg.evolution_time)
    qpe = _qpe_gates(u, work, clock)
    circ.extend(qpe)
    c = cfg.rotation_constant
    for k in range(cfg.min_clock_value, cfg.clock_size):
        ratio = min(c / cfg.clock_eigenvalue(k), 1.0)
        angle = 2 * math.asin(ratio)
        circ.append(_rotation_gate(angle, anc, clock, k, f"MCRY{k}({angle:.12g})"))
    circ.extend(adjoint(qpe))
    circ.measure(anc, ANCILLA_KEY)
    return circ


def build_hhl_2x2_specialized() -> Circuit:
    """Shallow 18-gate inversion of A = 1/2 [[3, 1], [1, 3]] on b = |0>.

    Qubits: 0 work, 1-2 clock, 3 ancilla.  With t0 = pi/2 the controlled
    powers reduce to ``e^{i3pi/4} RX(-pi/2)`` and ``X``; the two-qubit inverse
    QFT is used without its swap, so eigenvalue 1 sets clock qubit 2 and
    eigenvalue 2 sets clock qubit 1, each driving one controlled RY.
    """
    w, c0, c1, anc = 0, 1, 2, 3
    circ = Circuit(4, registers={"work": (w,), "clock": (c0, c1), "ancilla": (anc,)})
    u_half = rx_matrix(-math.pi / 2)
    qpe = [
        h(c0), h(c1),
        GateOp(controlled_matrix(u_half), (w, c0), "CRX(-1.57079632679)"),
        phase(3 * math.pi / 4, c0),
        cnot(c1, w),
        # inverse QFT on (c0, c1) without the final swap
        h(c1),
        cphase(-math.pi / 2, c0, c1),
        h(c0),
    ]
    circ.extend(qpe)
    # C = 1: eigenvalue 1 -> RY(pi), eigenvalue 2 -> RY(2 asin(1/2))
    circ.append(GateOp(controlled_matrix(ry_matrix(math.pi)), (anc, c1), "CRY(3.14159265359)"))
    circ.append(GateOp(controlled_matrix(ry_matrix(2 * math.asin(0.5))), (anc, c0), "CRY(1.0471975512)"))
    circ.extend(adjoint(qpe))
    circ.measure(anc, ANCILLA_KEY)
    return circ


# -- postselection -----------------------------------------------------------


def postselect_exact(circuit: Circuit, outcomes: dict | None = None, initial=None):
    """Noise-free run projecting each measurement onto a chosen outcome.

    ``outcomes`` maps measurement keys to bits (default 1 for every key).
    Returns ``(state, probability)`` where probability is the joint
    probability of the chosen outcomes.
    """
    outcomes = outcomes or {}
    n = circuit.num_qubits
    if initial is None:
        amps = np.zeros(1 << n, dtype=np.complex128)
        amps[0] = 1.0
    else:
        amps = initial.amplitudes
    prob = 1.0
    for kind, a, b in circuit.compiled():
        if kind == 0:
            amps = _accel.apply_matrix(amps, a, b)
        else:
            bit = outcomes.get(b, 1)
            p1 = _accel.prob_one(amps, a)
            p = p1 if bit else 1.0 - p1
            if p <= 1e-300:
                raise QBDLError("zero-probability", f"outcome {bit} of {b!r} cannot occur")
            prob *= p
            amps = _accel.collapse(amps, a, bit, p)
    amps = amps / np.linalg.norm(amps)
    return QuantumState(amps), prob


def success_probability(circuit: Circuit, key: str = ANCILLA_KEY) -> float:
    return postselect_exact(circuit, {key: 1})[1]


def work_vector(state: QuantumState, circuit: Circuit) -> np.ndarray:
    """Work-register amplitudes on the branch with clock 0 and ancilla 1."""
    work = circuit.registers["work"]
    anc = circuit.registers.get("ancilla", ())
    idx = sum(1 << q for q in anc)
    out = np.empty(1 << len(work), dtype=np.complex128)
    for i in range(out.shape[0]):
        j = idx + sum(((i >> bit) & 1) << q for bit, q in enumerate(work))
        out[i] = state.amplitudes[j]
    return out


@dataclass
class SuccessStats:
    repetitions: int
    output_state: QuantumState
    fidelity_vs_ideal: float
    flagged_success: bool
    # fidelity of the first run whose recorded ancilla bit was 1 (0 if none)
    first_flag_fidelity: float = 0.0
    ancilla_bit: int = 0


def run_until_success(circuit: Circuit, noise: NoiseSpec, rng, cap: int, ideal: QuantumState,
                      threshold: float = 0.9, key: str = ANCILLA_KEY) -> SuccessStats:
    """Repeat noisy runs until the ancilla records 1 and fidelity > threshold.

    Stops after ``cap`` runs; ``flagged_success`` is False in that case.
    """
    if [m.key for m in circuit.measurements] != [key]:
        raise QBDLError("bad-circuit", f"expected exactly one measurement keyed {key!r}")
    if cap < 1:
        raise QBDLError("bad-config", "cap must be >= 1")
    first_flag = None
    result = None
    fid = 0.0
    for rep in range(1, cap + 1):
        result = run_circuit(circuit, noise, rng)
        bit = result.recorded[key]
        if bit != 1:
            continue
        fid = fidelity(result.state, ideal)
        if first_flag is None:
            first_flag = fid
        if fid > threshold:
            return SuccessStats(rep, result.state, fid, True, first_flag, bit)
    final_fid = fidelity(result.state, ideal)
    return SuccessStats(cap, result.state, final_fid, False, first_flag or 0.0, result.recorded[key])


# -- swap test ---------------------------------------------------------------


def swap_test_gates(flag: int, reg_a, reg_b) -> list:
    """H - controlled-SWAP per qubit pair - H on ``flag`` (Fredkin decomposed)."""
    gates = [h(flag)]
    for qa, qb in zip(reg_a, reg_b):
        gates.extend(cswap(flag, qa, qb))
    gates.append(h(flag))
    return gates


def swap_test_circuit(num_qubits_per_state: int) -> Circuit:
    n = num_qubits_per_state
    reg_a, reg_b, flag = tuple(range(n)), tuple(range(n, 2 * n)), 2 * n
    circ = Circuit(2 * n + 1, registers={"a": reg_a, "b": reg_b, "flag": (flag,)})
    circ.extend(swap_test_gates(flag, reg_a, reg_b))
    circ.measure(flag, FLAG_KEY)
    return circ


def swap_test(a: QuantumState, b: QuantumState, shots: int, noise: NoiseSpec, rng) -> float:
    """Fraction of ``shots`` whose recorded flag bit is 0."""
    if a.amplitudes.shape != b.amplitudes.shape:
        raise QBDLError("shape-mismatch", "swap test needs states of equal dimension")
    if shots < 1:
        raise QBDLError("bad-shots", "shots must be >= 1")
    circ = swap_test_circuit(a.num_qubits)
    start = np.kron([1.0, 0.0], np.kron(b.amplitudes, a.amplitudes))
    initial = QuantumState(start)
    flag = circ.registers["flag"][0]
    if noise.gate_noise_p == 0.0:
        # gates are deterministic: sample the flag directly from its exact law
        pre = postselect_exact(Circuit(circ.num_qubits).extend(circ.gates), initial=initial)[0]
        p1 = _accel.prob_one(pre.amplitudes, flag)
        p_rec1 = p1 * (1 - noise.meas_noise_p) + (1 - p1) * noise.meas_noise_p
        ones = rng.binomial(shots, min(max(p_rec1, 0.0), 1.0))
        return (shots - ones) / shots
    zeros = 0
    for _ in range(shots):
        zeros += run_circuit(circ, noise, rng, initial).recorded[FLAG_KEY] == 0
    return zeros / shots


def fidelity_from_success(p: float) -> float:
    """Swap-test success probability to fidelity: ``|2P - 1|``."""
    if not 0.0 <= p <= 1.0:
        raise QBDLError("bad-probability", repr(p))
    return abs(2 * p - 1)


def build_swap_verification(circuit: Circuit, ideal_work) -> Circuit:
    """Extend an HHL circuit with a reference register and a swap test.

    The reference holds ``ideal_work`` (amplitude encoded) and the flag is
    measured under :data:`FLAG_KEY` after the ancilla measurement.
    """
    work = circuit.registers["work"]
    n = circuit.num_qubits
    ref = tuple(range(n, n + len(work)))
    flag = n + len(work)
    regs = dict(circuit.registers)
    regs.update(reference=ref, flag=(flag,))
    out = Circuit(flag + 1, list(circuit.ops), regs)
    out.extend(amplitude_encoding(ideal_work, ref))
    out.extend(swap_test_gates(flag, work, ref))
    out.measure(flag, FLAG_KEY)
    return out


def swap_after_success(circuit: Circuit, ideal_work, shots: int, noise: NoiseSpec, rng,
                       max_attempts: int | None = None) -> tuple:
    """Swap-test success rate over ``shots`` runs whose inversion succeeded.

    A run counts when the ancilla's true outcome is 1; its recorded flag
    bit (subject to readout noise) decides swap-test success.  Returns
    ``(p_success, attempts)``.
    """
    if shots < 1:
        raise QBDLError("bad-shots", "shots must be >= 1")
    full = build_swap_verification(circuit, ideal_work)
    max_attempts = max_attempts or 1000 * shots
    accepted = zeros = attempts = 0
    while accepted < shots:
        if attempts >= max_attempts:
            raise QBDLError("postselection-starved", f"{accepted} of {shots} shots after {attempts} attempts")
        attempts += 1
        res = run_circuit(full, noise, rng)
        if res.true_bits[ANCILLA_KEY] != 1:
            continue
        accepted += 1
        zeros += res.recorded[FLAG_KEY] == 0
    return zeros / shots, attempts


@dataclass(frozen=True)
class InversionReadout:
    """Solution estimate read from the exact pre-measurement statevector."""

    solution: np.ndarray
    success_probability: float
    config: HHLConfig
    qubits: int


def hhl_solve(a, b, clock_bits: int) -> InversionReadout:
    """Estimate ``A^-1 b`` with the HHL circuit.

    The branch with clock 0 and ancilla 1 holds ``C A^-1 b / |b|``, so scaling
    those amplitudes by ``|b| / C`` recovers the unnormalized solution.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float).reshape(-1)
    norm = np.linalg.norm(b)
    if norm == 0:
        raise QBDLError("zero-vector")
    cfg = HHLConfig.for_matrix(a, clock_bits)
    circ = build_hhl(a, b / norm, cfg)
    gates_only = Circuit(circ.num_qubits, circ.gates, dict(circ.registers))
    state = postselect_exact(gates_only)[0]
    amps = work_vector(state, circ)
    p1 = _accel.prob_one(state.amplitudes, circ.registers["ancilla"][0])
    return InversionReadout(amps.real * norm / cfg.rotation_constant, float(p1), cfg, circ.num_qubits)
