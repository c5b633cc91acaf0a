"""Noise studies, the end-to-end GP demo and the element-wise validation runs."""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import elementwise as ew
from .. import hhl
from ..errors import QBDLError
from ..gp import GPModel, PredictionQuery, gp_mean, gp_variance, solve_spd
from ..kernel import Dataset, HyperParams, kernel_to_layer, next_power_of_two
from ..qsim.state import DensityOp, NoiseSpec
from . import records
from .config import ExperimentConfig
from .plots import emit_plot

log = logging.getLogger(__name__)

MAX_CONDITION = 16.0


@dataclass
class ExperimentOutput:
    rows: list
    summary: list = field(default_factory=list)
    paths: dict = field(default_factory=dict)


def _noise(kind: str, p: float, scope: str) -> NoiseSpec:
    if kind == "gate":
        return NoiseSpec(gate_noise_p=p, scope=scope)
    return NoiseSpec(meas_noise_p=p, scope=scope)


def _map(fn, tasks, workers: int):
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))


def inversion_circuit(cfg: ExperimentConfig):
    """HHL circuit for the configured system plus its normalized classical solution."""
    if cfg.specialized:
        return hhl.build_hhl_2x2_specialized(), hhl.SPECIALIZED_SOLUTION
    if cfg.matrix is None or cfg.vector is None:
        raise QBDLError("bad-config", "hhl.matrix and hhl.vector are required")
    a = np.asarray(cfg.matrix, dtype=float)
    b = np.asarray(cfg.vector, dtype=float)
    b = b / np.linalg.norm(b)
    circ = hhl.build_hhl(a, b, hhl.HHLConfig.for_matrix(a, cfg.clock_bits))
    x = solve_spd(a, b)
    return circ, x / np.linalg.norm(x)


# -- figures 2 and 3 -----------------------------------------------------------


def _trial_batch(task):
    experiment, circuit, ideal, kind, p, scope, seeds, cap, threshold = task
    noise = _noise(kind, p, scope)
    rows = []
    for trial, seed in enumerate(seeds):
        stats = hhl.run_until_success(circuit, noise, np.random.default_rng(seed), cap, ideal, threshold)
        rows.append({
            "experiment": experiment, "noise_type": kind, "p": p, "seed": seed, "trial": trial,
            "ancilla_bit": stats.ancilla_bit, "fidelity": stats.first_flag_fidelity,
            "repetitions": stats.repetitions, "success": stats.flagged_success,
        })
    return rows


def _noise_study(cfg: ExperimentConfig, name: str, out_dir) -> ExperimentOutput:
    circuit, _ = inversion_circuit(cfg)
    ideal, _ = hhl.postselect_exact(circuit)
    tasks = []
    for ti, kind in enumerate(cfg.noise_types):
        for gi, p in enumerate(cfg.noise_grid):
            seeds = [records.trial_seed(cfg.seed, ti, gi, t) for t in range(cfg.trials_per_point)]
            tasks.append((name, circuit, ideal, kind, p, cfg.noise_scope, seeds, cfg.max_repetitions, cfg.threshold))
    rows = [r for batch in _map(_trial_batch, tasks, cfg.workers) for r in batch]
    summary = records.summarize_trials(rows, name)
    out = ExperimentOutput(rows, summary)
    if out_dir is not None:
        out_dir = Path(out_dir)
        out.paths["trials"] = records.write_csv(out_dir / f"{name}_trials.csv", records.TRIAL_COLUMNS, rows)
        out.paths["summary"] = records.write_csv(out_dir / f"{name}_summary.csv", records.SUMMARY_COLUMNS, summary)
        for kind in ("fidelity", "repetitions"):
            for i, path in enumerate(emit_plot(out.paths["summary"], kind, out_dir)):
                out.paths[f"{kind}_plot_{i}"] = path
        _finish(cfg, out)
    return out


def run_fig2(cfg: ExperimentConfig, out_dir=None) -> ExperimentOutput:
    """Fidelity and repetitions versus noise for the shallow 2x2 circuit."""
    return _noise_study(cfg, "fig2", out_dir)


def run_fig3(cfg: ExperimentConfig, out_dir=None) -> ExperimentOutput:
    """Same study on the general circuit for the pinned 4x4 system."""
    return _noise_study(cfg, "fig3", out_dir)


# -- figure 4 ------------------------------------------------------------------


def _swap_task(task):
    circuit, ideal_work, kind, p, scope, seed, shots = task
    p_success, attempts = hhl.swap_after_success(circuit, ideal_work, shots, _noise(kind, p, scope),
                                                 np.random.default_rng(seed))
    return {
        "experiment": "fig4", "noise_type": kind, "p": p, "seed": seed, "shots": shots,
        "attempts": attempts, "p_success": p_success, "fidelity": hhl.fidelity_from_success(p_success),
    }


def run_fig4(cfg: ExperimentConfig, out_dir=None) -> ExperimentOutput:
    """Swap-test success probability after a successful inversion."""
    circuit, ideal_work = inversion_circuit(cfg)
    tasks = []
    for ti, kind in enumerate(cfg.noise_types):
        for gi, p in enumerate(cfg.noise_grid):
            tasks.append((circuit, ideal_work, kind, p, cfg.noise_scope, records.trial_seed(cfg.seed, ti, gi, 0),
                          cfg.shots))
    rows = _map(_swap_task, tasks, cfg.workers)
    out = ExperimentOutput(rows)
    if out_dir is not None:
        out_dir = Path(out_dir)
        out.paths["swap"] = records.write_csv(out_dir / "fig4_swap.csv", records.SWAP_COLUMNS, rows)
        out.paths["swap_plot"] = emit_plot(out.paths["swap"], "swap", out_dir)[0]
        _finish(cfg, out)
    return out


# -- end to end ----------------------------------------------------------------


@dataclass(frozen=True)
class GPComparison:
    classical_mean: float
    quantum_mean: float
    classical_variance: float
    quantum_variance: float
    kappa: float
    clock_bits: int
    qubits: int
    success_probability: float

    @property
    def mean_error(self) -> float:
        return _relative(self.quantum_mean, self.classical_mean)

    @property
    def variance_error(self) -> float:
        return _relative(self.quantum_variance, self.classical_variance)


def _relative(q, c):
    return abs(q - c) / abs(c) if c != 0 else abs(q - c)


def pad_system(a: np.ndarray, vec: np.ndarray):
    """Embed ``a`` in a power-of-two system; the padding block is ``lambda_max I``.

    ``vec`` is zero on the padding, so the block never enters the solution and
    the condition number is unchanged.
    """
    n = a.shape[0]
    size = max(2, next_power_of_two(n))
    out = np.eye(size) * np.linalg.eigvalsh(a).max()
    out[:n, :n] = a
    padded = np.zeros(size)
    padded[:n] = vec
    return out, padded


def quantum_gp_predict(train_kernel, k_star, k_ss: float, targets, noise_var: float,
                       clock_bits: int) -> GPComparison:
    """GP mean and variance with ``(K + s I)^-1`` applied by simulated HHL."""
    model = GPModel(np.asarray(train_kernel, dtype=float), targets, noise_var)
    query = PredictionQuery(k_star, k_ss)
    cov = model.covariance()
    eigs = np.linalg.eigvalsh(cov)
    if eigs.min() <= 0:
        raise QBDLError("not-positive-definite", f"min eigenvalue {eigs.min()!r}")
    kappa = float(eigs.max() / eigs.min())
    if kappa > MAX_CONDITION:
        raise QBDLError("ill-conditioned-for-clock-bits", f"condition number {kappa:.3g} > {MAX_CONDITION:g}")
    n = model.n
    a, y = pad_system(cov, model.targets)
    _, ks = pad_system(cov, query.k_star)
    sol_y = hhl.hhl_solve(a, y, clock_bits)
    q_mean = float(ks @ sol_y.solution)
    if np.any(query.k_star):
        sol_k = hhl.hhl_solve(a, ks, clock_bits)
        q_var = float(query.k_ss - ks[:n] @ sol_k.solution[:n])
    else:
        q_var = float(query.k_ss)
    return GPComparison(
        gp_mean(model, query), q_mean, gp_variance(model, query), max(q_var, 0.0),
        kappa, clock_bits, sol_y.qubits, sol_y.success_probability,
    )


def demo_problem(cfg: ExperimentConfig):
    """Training kernel, query row, query variance and targets from the configured dataset."""
    data = Dataset(cfg.points, cfg.targets)
    query = np.asarray(cfg.query, dtype=float).reshape(1, -1)
    if query.shape[1] != data.d_in:
        raise QBDLError("shape-mismatch", f"query has {query.shape[1]} inputs, dataset {data.d_in}")
    if data.n > 4:
        raise QBDLError("bad-config", f"{data.n} training points; the demo supports at most 4")
    hyper = HyperParams(cfg.sigma_b_sq, cfg.sigma_w_sq, cfg.depth)
    full = kernel_to_layer(Dataset(np.vstack([data.points, query])), hyper).values
    n = data.n
    return full[:n, :n], full[n, :n], float(full[n, n]), data.targets


def run_end_to_end(cfg: ExperimentConfig, out_dir=None) -> ExperimentOutput:
    kernel, k_star, k_ss, y = demo_problem(cfg)
    cmp = quantum_gp_predict(kernel, k_star, k_ss, y, cfg.noise_var, cfg.clock_bits)
    common = {"kappa": cmp.kappa, "clock_bits": cmp.clock_bits, "qubits": cmp.qubits,
              "success_probability": cmp.success_probability}
    rows = [
        {"quantity": "mean", "classical": cmp.classical_mean, "quantum": cmp.quantum_mean,
         "relative_error": cmp.mean_error, **common},
        {"quantity": "variance", "classical": cmp.classical_variance, "quantum": cmp.quantum_variance,
         "relative_error": cmp.variance_error, **common},
    ]
    out = ExperimentOutput(rows, [cmp])
    if out_dir is not None:
        out.paths["report"] = records.write_csv(Path(out_dir) / "end_to_end.csv", records.END_TO_END_COLUMNS, rows)
        _finish(cfg, out)
    return out


# -- element-wise channels -------------------------------------------------------


def random_density(rng, d: int) -> DensityOp:
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    m = g @ g.conj().T
    return DensityOp(m / np.trace(m).real)


def _elementwise_task(task):
    pattern, t, eps, instance, seed, d = task
    pat = ew.ProductPattern(pattern)
    rng = np.random.default_rng(seed)
    inputs = [random_density(rng, d) for _ in range(pat.order)]
    sigma = random_density(rng, d)
    row = {"pattern": pattern, "order": pat.order, "t": t, "epsilon": eps, "instance": instance, "seed": seed,
           "steps": 0, "copies_consumed": 0, "error": math.nan, "status": "ok"}
    try:
        budget = ew.ChannelBudget.plan(t, eps)
        sim = ew.evolve_elementwise(pat, inputs, sigma, t, eps, budget=budget)
    except QBDLError as exc:
        row["status"] = exc.code
        return row
    exact = ew.exact_elementwise_evolution(pat, inputs, sigma, t)
    row.update(steps=budget.steps, copies_consumed=budget.copies_consumed,
               error=ew.trace_distance(sim, exact))
    return row


def run_elementwise(cfg: ExperimentConfig, out_dir=None) -> ExperimentOutput:
    """Trace distance between Trotterized channels and exact evolution per pattern and epsilon."""
    tasks = []
    for pi, pattern in enumerate(cfg.patterns):
        for ei, eps in enumerate(cfg.epsilons):
            for inst in range(cfg.instances):
                # inputs depend on (pattern, instance) only, so epsilon rows compare like with like
                tasks.append((pattern, cfg.evolution_time, eps, inst, records.trial_seed(cfg.seed, pi, inst), cfg.dim))
    rows = _map(_elementwise_task, tasks, cfg.workers)
    out = ExperimentOutput(rows)
    if out_dir is not None:
        out_dir = Path(out_dir)
        out.paths["errors"] = records.write_csv(out_dir / "elementwise.csv", records.ELEMENTWISE_COLUMNS, rows)
        out.paths["error_plot"] = emit_plot(out.paths["errors"], "elementwise", out_dir)[0]
        _finish(cfg, out)
    return out


RUNNERS = {
    "fig2": run_fig2,
    "fig3": run_fig3,
    "fig4": run_fig4,
    "end-to-end": run_end_to_end,
    "elementwise": run_elementwise,
}


def run_experiment(cfg: ExperimentConfig, out_dir=None) -> ExperimentOutput:
    return RUNNERS[cfg.experiment](cfg, out_dir)


def _finish(cfg: ExperimentConfig, out: ExperimentOutput):
    first = next(iter(out.paths.values()))
    out.paths["manifest"] = records.write_manifest(Path(first).parent, cfg.to_dict(), out.paths.values())
    log.info("%s: wrote %d files to %s", cfg.experiment, len(out.paths), Path(first).parent)
