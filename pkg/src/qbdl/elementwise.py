"""Element-wise density-matrix exponentiation.

Copies of density operators act as a Hamiltonian through small-angle
conjugations by modified SWAP operators followed by a partial trace.  With
inputs ``rho_1 .. rho_r`` and a target ``sigma`` the channel generates
``exp(-i G t)`` where ``G`` chains Hadamard products (``h``) and diagonal
outer products (``o``) of the inputs.

Tensor order is ``rho_1 (x) ... (x) rho_r (x) sigma`` with ``rho_1`` the most
significant factor.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import QBDLError
from .kernel import PolySpec
from .qsim.state import DensityOp, expm_hermitian, trace_distance

MAX_DIM = 16
MAX_STEPS = 10_000_000
_OPS = {"h": "hadamard", "o": "diag_outer"}


@dataclass(frozen=True)
class ProductPattern:
    """Left-to-right chain of ``h`` / ``o`` products over ``order`` inputs.

    The empty pattern is the single-input case (plain density-matrix
    exponentiation of ``rho`` itself).
    """

    ops: str = ""

    def __post_init__(self):
        ops = "".join(self.ops) if not isinstance(self.ops, str) else self.ops
        if set(ops) - set(_OPS):
            raise QBDLError("bad-pattern", repr(self.ops))
        object.__setattr__(self, "ops", ops)

    @property
    def order(self) -> int:
        return len(self.ops) + 1

    def __str__(self):
        return self.ops


def _as_pattern(p) -> ProductPattern:
    return p if isinstance(p, ProductPattern) else ProductPattern(p)


def _matrix(x) -> np.ndarray:
    return x.matrix if isinstance(x, DensityOp) else np.asarray(x, dtype=np.complex128)


def _same_shape(a, b):
    if a.shape != b.shape or a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise QBDLError("shape-mismatch", f"{a.shape} vs {b.shape}")


def hadamard_product(r1, r2) -> np.ndarray:
    a, b = _matrix(r1), _matrix(r2)
    _same_shape(a, b)
    return a * b


def diag_outer(r1, r2) -> np.ndarray:
    """``M[j, k] = r1[j, j] * r2[k, k]``."""
    a, b = _matrix(r1), _matrix(r2)
    _same_shape(a, b)
    return np.outer(np.diag(a), np.diag(b))


def hermitian_part(m) -> np.ndarray:
    m = np.asarray(m)
    return (m + m.conj().T) / 2


def product_chain(pattern, inputs: Sequence) -> np.ndarray:
    """Fold the inputs left to right with the pattern's products (no symmetrization)."""
    pattern = _as_pattern(pattern)
    mats = [_matrix(r) for r in inputs]
    if len(mats) != pattern.order:
        raise QBDLError("shape-mismatch", f"pattern {pattern.ops!r} needs {pattern.order} inputs, got {len(mats)}")
    out = mats[0]
    for op, nxt in zip(pattern.ops, mats[1:]):
        out = hadamard_product(out, nxt) if op == "h" else diag_outer(out, nxt)
    return out


def classical_generator(pattern, inputs: Sequence) -> np.ndarray:
    """Hermitian part of :func:`product_chain`; the Hamiltonian the channel simulates."""
    return hermitian_part(product_chain(pattern, inputs))


def hermitian_deviation(pattern, inputs: Sequence) -> float:
    """``||M - M^dagger||_2`` of the raw chain, reported when ``o`` breaks symmetry."""
    m = product_chain(pattern, inputs)
    return float(np.linalg.norm(m - m.conj().T, 2))


@dataclass(frozen=True)
class ModSwapOperator:
    """0/1 operator on ``d^(order+1)`` built from ``d^2`` matrix units.

    ``matrix`` is the literal sum of tensor products.  Patterns containing a
    diagonal outer product give a non-symmetric sum, so the channel uses
    :attr:`generator`, its Hermitian part.
    """

    order: int
    dim: int
    matrix: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return self.dim ** (self.order + 1)

    @property
    def nonzeros(self) -> int:
        return int(np.count_nonzero(self.matrix))

    @property
    def is_hermitian(self) -> bool:
        return bool(np.array_equal(self.matrix, self.matrix.T))

    @property
    def generator(self) -> np.ndarray:
        return hermitian_part(self.matrix)


def _factor_layout(pattern: ProductPattern) -> list:
    # one entry per input; "jk" is |j><k|, "jj" is |j><j|, "kk" is |k><k|
    layout = ["jk"]
    for op in pattern.ops:
        if op == "h":
            layout.append("jk")
        else:
            layout = ["jj"] * len(layout) + ["kk"]
    return layout


def _assemble(layout: Sequence[str], d: int) -> np.ndarray:
    # the target factor is always |k><j|
    factors = list(layout) + ["kj"]
    n = len(factors)
    size = d ** n
    j, k = np.meshgrid(np.arange(d), np.arange(d), indexing="ij")
    j, k = j.ravel(), k.ravel()
    pick = {"j": j, "k": k}
    rows = np.zeros_like(j)
    cols = np.zeros_like(j)
    for f in factors:
        rows = rows * d + pick[f[0]]
        cols = cols * d + pick[f[1]]
    out = np.zeros((size, size))
    out[rows, cols] = 1.0
    out.setflags(write=False)
    return out


def _check_dim(d: int):
    if not 2 <= d <= MAX_DIM:
        raise QBDLError("bad-dimension", f"d={d} outside 2..{MAX_DIM}")


@functools.lru_cache(maxsize=128)
def _cached_operator(ops: str, d: int) -> ModSwapOperator:
    pattern = ProductPattern(ops)
    return ModSwapOperator(pattern.order, d, _assemble(_factor_layout(pattern), d))


def build_swap(d: int) -> ModSwapOperator:
    """Plain SWAP, the single-input operator."""
    _check_dim(d)
    return _cached_operator("", d)


def build_S1(d: int) -> ModSwapOperator:
    """``sum_jk |j><k| (x) |j><k| (x) |k><j|``."""
    _check_dim(d)
    return _cached_operator("h", d)


def build_S2(d: int) -> ModSwapOperator:
    """``sum_jk |j><j| (x) |k><k| (x) |k><j|``."""
    _check_dim(d)
    return _cached_operator("o", d)


def build_Stilde(pattern, d: int) -> ModSwapOperator:
    """Operator for a pattern with at least one product.

    Each ``h`` appends a ``|j><k|`` factor; each ``o`` turns every earlier
    factor into ``|j><j|`` and appends ``|k><k|``.
    """
    pattern = _as_pattern(pattern)
    if not pattern.ops:
        raise QBDLError("empty-pattern", "use build_swap for a single input")
    _check_dim(d)
    return _cached_operator(pattern.ops, d)


def operator_for(pattern, d: int) -> ModSwapOperator:
    pattern = _as_pattern(pattern)
    return build_swap(d) if not pattern.ops else build_Stilde(pattern, d)


@dataclass
class ChannelBudget:
    """Step plan for time ``t`` at accuracy ``epsilon`` plus a copy counter."""

    t: float
    epsilon: float
    steps: int
    copies_consumed: int = 0

    def __post_init__(self):
        if self.steps < 1:
            raise QBDLError("bad-budget", f"steps={self.steps}")
        if self.steps > MAX_STEPS:
            raise QBDLError("budget-exceeded", f"{self.steps} steps > {MAX_STEPS}")

    @classmethod
    def plan(cls, t: float, epsilon: float) -> "ChannelBudget":
        if not t > 0 or not math.isfinite(t):
            raise QBDLError("bad-time", repr(t))
        if not 0 < epsilon < 1:
            raise QBDLError("bad-epsilon", repr(epsilon))
        return cls(t, epsilon, _ceil(t * t / epsilon))

    @property
    def delta(self) -> float:
        return self.t / self.steps

    def consume(self, copies: int):
        self.copies_consumed += copies


def _ceil(x: float) -> int:
    # shave float noise so t^2/eps = 100.00000000000001 gives 100 steps
    return max(1, math.ceil(x - 1e-9 * max(1.0, abs(x))))


def _step_unitary(op: ModSwapOperator, delta: float) -> np.ndarray:
    return expm_hermitian(op.generator, delta)


def _apply_step(u: np.ndarray, env: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    d = sigma.shape[0]
    big = np.kron(env, sigma)
    out = u @ big @ u.conj().T
    e = env.shape[0]
    red = np.einsum("aiak->ik", out.reshape(e, d, e, d))
    return hermitian_part(red)


def _environment(inputs: Sequence[np.ndarray]) -> np.ndarray:
    env = inputs[0]
    for m in inputs[1:]:
        env = np.kron(env, m)
    return env


def _inputs_for(pattern: ProductPattern, rho) -> list:
    if isinstance(rho, (list, tuple)):
        mats = [_matrix(r) for r in rho]
        if len(mats) != pattern.order:
            raise QBDLError("shape-mismatch", f"pattern {pattern.ops!r} needs {pattern.order} inputs, got {len(mats)}")
    else:
        mats = [_matrix(rho)] * pattern.order
    for m in mats[1:]:
        _same_shape(mats[0], m)
    return mats


def trotter_channel_step(S: ModSwapOperator, inputs: Sequence, sigma, delta: float) -> DensityOp:
    """One conjugation by ``exp(-i S delta)`` followed by tracing out the inputs.

    A negative ``delta`` runs the step backwards (conjugation by
    ``exp(+i S |delta|)``), which is how negative polynomial weights are realized.
    """
    if not math.isfinite(delta):
        raise QBDLError("bad-delta", repr(delta))
    mats = [_matrix(r) for r in inputs]
    sig = _matrix(sigma)
    if len(mats) != S.order or any(m.shape != (S.dim, S.dim) for m in mats + [sig]):
        raise QBDLError("shape-mismatch", f"operator order {S.order} dim {S.dim}")
    if delta == 0:
        return DensityOp(sig)
    return DensityOp(_apply_step(_step_unitary(S, delta), _environment(mats), sig))


def _run_steps(op, env, sig, delta, steps, budget, order):
    u = _step_unitary(op, delta)
    for _ in range(steps):
        sig = _apply_step(u, env, sig)
        if budget is not None:
            budget.consume(order)
    return sig


def evolve_elementwise(pattern, rho, sigma, t: float, epsilon: float, budget: ChannelBudget | None = None) -> DensityOp:
    """Simulate ``exp(-i G t) sigma exp(i G t)`` with ``ceil(t^2/epsilon)`` channel steps.

    ``rho`` is either one density operator used for every input slot or a
    sequence of ``order`` operators.  Pass a :class:`ChannelBudget` to read the
    step plan and copy count back.
    """
    pattern = _as_pattern(pattern)
    plan = ChannelBudget.plan(t, epsilon)
    if budget is None:
        budget = plan
    elif (budget.steps, budget.t) != (plan.steps, plan.t):
        raise QBDLError("bad-budget", "budget was planned for a different t or epsilon")
    mats = _inputs_for(pattern, rho)
    sig = _matrix(sigma)
    _same_shape(mats[0], sig)
    op = operator_for(pattern, sig.shape[0])
    out = _run_steps(op, _environment(mats), sig, budget.delta, budget.steps, budget, pattern.order)
    return DensityOp(out)


def exact_elementwise_evolution(pattern, rho, sigma, t: float) -> DensityOp:
    pattern = _as_pattern(pattern)
    mats = _inputs_for(pattern, rho)
    sig = _matrix(sigma)
    _same_shape(mats[0], sig)
    if sig.shape[0] > MAX_DIM:
        raise QBDLError("bad-dimension", f"{sig.shape[0]} > {MAX_DIM}")
    gen = classical_generator(pattern, mats)
    u = expm_hermitian(gen, t)
    return DensityOp(hermitian_part(u @ sig @ u.conj().T))


def polynomial_generator(spec: PolySpec, rho) -> np.ndarray:
    """``sum_r c_r Herm(rho^(pattern_r))`` for r >= 1; the constant term is a global phase."""
    mat = _matrix(rho)
    gen = np.zeros_like(mat, dtype=np.complex128)
    for r in range(1, spec.degree + 1):
        c = spec.coefficients[r]
        if c != 0.0:
            gen += c * classical_generator(spec.patterns[r], [mat] * r)
    return gen


def exact_polynomial_evolution(spec: PolySpec, rho, sigma, t: float) -> DensityOp:
    u = expm_hermitian(polynomial_generator(spec, rho), t)
    sig = _matrix(sigma)
    return DensityOp(hermitian_part(u @ sig @ u.conj().T))


def evolve_polynomial(spec: PolySpec, rho, sigma, t: float, epsilon: float, m: int | None = None,
                      budgets: dict | None = None) -> DensityOp:
    """Lie-product composition of the per-power channels.

    Each of ``m`` rounds (default: the degree) runs ``ceil(t^2 / (m epsilon))``
    steps of every non-zero term, each step lasting ``c_r t / (m k)``.  When a
    dict is passed as ``budgets`` it receives one :class:`ChannelBudget` per power.
    """
    if spec.degree < 1:
        raise QBDLError("bad-degree", repr(spec.degree))
    m = spec.degree if m is None else int(m)
    if m < 1:
        raise QBDLError("bad-config", f"m={m}")
    if not t > 0 or not 0 < epsilon < 1:
        raise QBDLError("bad-config", f"t={t!r} epsilon={epsilon!r}")
    mat = _matrix(rho)
    sig = _matrix(sigma)
    _same_shape(mat, sig)
    per_round = _ceil(t * t / (m * epsilon))
    if per_round * m * spec.degree > MAX_STEPS:
        raise QBDLError("budget-exceeded", f"{per_round * m * spec.degree} steps > {MAX_STEPS}")
    terms = []
    for r in range(1, spec.degree + 1):
        c = spec.coefficients[r]
        if c == 0.0:
            continue
        op = operator_for(spec.patterns[r], mat.shape[0])
        delta = c * t / (m * per_round)
        budget = ChannelBudget(t, epsilon, per_round * m)
        if budgets is not None:
            budgets[r] = budget
        terms.append((op, _step_unitary(op, delta), _environment([mat] * r), budget, r))
    for _ in range(m):
        for op, u, env, budget, r in terms:
            for _ in range(per_round):
                sig = _apply_step(u, env, sig)
                budget.consume(r)
    return DensityOp(sig)


def copies_estimate(degree: int, t: float, epsilon: float) -> float:
    """Reference copy count ``N^2 t^2 / epsilon``."""
    return degree * degree * t * t / epsilon


def channel_error(pattern, rho, sigma, t: float, epsilon: float) -> float:
    """Trace distance between the simulated channel and the exact evolution."""
    sim = evolve_elementwise(pattern, rho, sigma, t, epsilon)
    return trace_distance(sim, exact_elementwise_evolution(pattern, rho, sigma, t))
