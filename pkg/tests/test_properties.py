import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from qbdl import elementwise as ew
from qbdl.gp import GPModel, PredictionQuery, gp_mean, gp_variance
from qbdl.hhl import fidelity_from_success
from qbdl.kernel import HyperParams, KernelMatrix, relu_layer_step
from qbdl.qsim import Circuit, GateOp, NoiseSpec, QuantumState, partial_trace, run_circuit, statevector
from qbdl.qsim.circuit import FIXED_GATES

from oracles import random_density, random_spd

seeds = st.integers(0, 2**32 - 1)


def random_circuit(rng, n, length):
    labels = [k for k, u in FIXED_GATES.items() if np.asarray(u).shape[0] <= 1 << min(n, 2)]
    circ = Circuit(n)
    for _ in range(length):
        label = labels[rng.integers(len(labels))]
        u = np.asarray(FIXED_GATES[label])
        k = u.shape[0].bit_length() - 1
        circ.append(GateOp(u, tuple(int(q) for q in rng.choice(n, size=k, replace=False)), label))
    return circ


def test_norm_preserved_over_random_circuits():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        n = int(rng.integers(1, 6))
        circ = random_circuit(rng, n, int(rng.integers(1, 30)))
        start = QuantumState.from_vector(rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n))
        assert abs(np.linalg.norm(statevector(circ, start).amplitudes) - 1) <= 1e-10


@settings(max_examples=60, deadline=None)
@given(seeds, st.floats(0, 1), st.floats(0, 1))
def test_noisy_runs_stay_normalized(seed, gate_p, meas_p):
    rng = np.random.default_rng(seed)
    circ = random_circuit(rng, 3, 12)
    circ.measure(0, "a")
    res = run_circuit(circ, NoiseSpec(gate_p, meas_p, "all"), rng)
    assert abs(np.linalg.norm(res.state.amplitudes) - 1) <= 1e-10
    assert res.recorded["a"] in (0, 1)


@settings(max_examples=60, deadline=None)
@given(seeds, st.integers(1, 3), st.integers(1, 3))
def test_partial_trace_is_a_density(seed, qa, qb):
    rng = np.random.default_rng(seed)
    rho = random_density(rng, 1 << (qa + qb))
    red = partial_trace(rho, [1 << qa, 1 << qb], [0])
    assert abs(np.trace(red) - 1) <= 1e-10
    assert np.linalg.eigvalsh(red).min() >= -1e-10


@settings(max_examples=100, deadline=None)
@given(seeds)
def test_relu_step_psd(seed):
    rng = np.random.default_rng(seed)
    k = random_spd(rng, 4, 0.05, 4.0, force_ends=False)
    hyper = HyperParams(float(rng.uniform(0, 1)), float(rng.uniform(0.1, 3)), 3)
    km = KernelMatrix(0, k, hyper)
    for _ in range(3):
        km = relu_layer_step(km)
        assert np.linalg.eigvalsh(km.values).min() >= -1e-10


@settings(max_examples=100, deadline=None)
@given(seeds, st.integers(1, 8), st.floats(0, 1))
def test_gp_variance_nonnegative_and_mean_linear(seed, n, noise_var):
    rng = np.random.default_rng(seed)
    full = random_spd(rng, n + 1, 0.05, 3.0, force_ends=False)
    y1, y2 = rng.normal(size=n), rng.normal(size=n)
    q = PredictionQuery(full[n, :n], full[n, n])
    m = GPModel(full[:n, :n], y1, noise_var)
    assert gp_variance(m, q) >= -1e-10
    total = gp_mean(GPModel(full[:n, :n], y1 + y2, noise_var), q)
    assert abs(total - gp_mean(m, q) - gp_mean(GPModel(full[:n, :n], y2, noise_var), q)) <= 1e-10


@given(st.floats(0, 1))
def test_fidelity_from_success_range(p):
    assert 0.0 <= fidelity_from_success(p) <= 1.0


@settings(max_examples=40, deadline=None)
@given(seeds, st.text(alphabet="ho", max_size=3), st.floats(-1.0, 1.0))
def test_channel_step_output_is_density(seed, ops, delta):
    rng = np.random.default_rng(seed)
    mats = [random_density(rng, 2) for _ in range(len(ops) + 1)]
    out = ew.trotter_channel_step(ew.operator_for(ops, 2), mats, random_density(rng, 2), delta).matrix
    assert np.abs(out - out.conj().T).max() <= 1e-9
    assert abs(np.trace(out) - 1) <= 1e-9
    assert np.linalg.eigvalsh(out).min() >= -1e-8
