"""Dense statevector / density-operator simulator."""
from .circuit import (
    Circuit,
    Measure,
    RunResult,
    cnot,
    controlled,
    cphase,
    cswap,
    h,
    phase,
    run_circuit,
    ry,
    statevector,
    swap,
    toffoli,
    x,
)
from .state import (
    DensityOp,
    GateOp,
    NoiseSpec,
    QuantumState,
    apply_gate,
    apply_gate_noise,
    expm_hermitian,
    fidelity,
    measure,
    partial_trace,
    reduced_density,
    register_fidelity,
    trace_distance,
)
