"""Command-line entry point: ``python -m qbdl <command> ...``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import elementwise as ew
from . import hhl
from .errors import QBDLError
from .gp import GPModel, PredictionQuery, gp_mean, gp_variance
from .harness import default_config, load_config, run_experiment
from .harness.experiments import random_density
from .kernel import Dataset, HyperParams, KernelForm, kernel_to_layer
from .qsim.state import NoiseSpec, QuantumState, register_fidelity

log = logging.getLogger("qbdl")


def _floats(text: str) -> np.ndarray:
    return np.array([float(v) for v in text.replace(";", ",").split(",") if v.strip()])


def _hyper(args) -> HyperParams:
    return HyperParams(args.sigma_b_sq, args.sigma_w_sq, args.depth, KernelForm(args.form))


def _add_kernel_args(p):
    p.add_argument("--data", required=True, help="CSV of points, last column the target unless --no-targets")
    p.add_argument("--no-targets", action="store_true")
    p.add_argument("--depth", type=int, default=1)
    p.add_argument("--sigma-b-sq", type=float, default=0.0)
    p.add_argument("--sigma-w-sq", type=float, default=2.0)
    p.add_argument("--form", choices=[f.value for f in KernelForm], default=KernelForm.CORRECTED.value)


def cmd_kernel(args):
    data = Dataset.from_text(args.data, has_targets=not args.no_targets)
    text = kernel_to_layer(data, _hyper(args)).to_text()
    _emit(text, args.out)


def cmd_gp(args):
    data = Dataset.from_text(args.data)
    query = _floats(args.query).reshape(1, -1)
    full = kernel_to_layer(Dataset(np.vstack([data.points, query])), _hyper(args)).values
    n = data.n
    model = GPModel(full[:n, :n], data.targets, args.noise_var)
    q = PredictionQuery(full[n, :n], full[n, n])
    _emit(f"mean,{gp_mean(model, q)!r}\nvariance,{gp_variance(model, q)!r}\n", args.out)


def cmd_hhl(args):
    if args.specialized:
        circ, target = hhl.build_hhl_2x2_specialized(), hhl.SPECIALIZED_SOLUTION
    else:
        if not args.matrix or not args.vector:
            raise QBDLError("bad-arguments", "--matrix and --vector are required without --specialized")
        a = np.loadtxt(args.matrix, delimiter=",", ndmin=2)
        b = _floats(args.vector)
        b = b / np.linalg.norm(b)
        circ = hhl.build_hhl(a, b, hhl.HHLConfig.for_matrix(a, args.clock_bits))
        target = np.linalg.solve(a, b)
    state, prob = hhl.postselect_exact(circ)
    fid = register_fidelity(state, circ.registers["work"], target)
    lines = [f"qubits,{circ.num_qubits}", f"gates,{circ.gate_count}", f"success_probability,{prob!r}",
             f"fidelity,{fid!r}"]
    if args.shots:
        rng = np.random.default_rng(args.seed)
        noise = NoiseSpec(args.gate_noise, args.meas_noise, args.noise_scope)
        p_success, _ = hhl.swap_after_success(circ, target / np.linalg.norm(target), args.shots, noise, rng)
        lines.append(f"swap_p_success,{p_success!r}")
    if args.circuit_out:
        Path(args.circuit_out).write_text(circ.dumps(), encoding="utf-8")
    _emit("\n".join(lines) + "\n", args.out)


def cmd_swap_test(args):
    a = QuantumState.from_vector(_floats(args.a))
    b = QuantumState.from_vector(_floats(args.b))
    noise = NoiseSpec(args.gate_noise, args.meas_noise, args.noise_scope)
    p = hhl.swap_test(a, b, args.shots, noise, np.random.default_rng(args.seed))
    _emit(f"p_success,{p!r}\nfidelity,{hhl.fidelity_from_success(p)!r}\n", args.out)


def cmd_elementwise(args):
    pattern = ew.ProductPattern(args.pattern)
    rng = np.random.default_rng(args.seed)
    inputs = [random_density(rng, args.dim) for _ in range(pattern.order)]
    sigma = random_density(rng, args.dim)
    budget = ew.ChannelBudget.plan(args.t, args.epsilon)
    sim = ew.evolve_elementwise(pattern, inputs, sigma, args.t, args.epsilon, budget=budget)
    err = ew.trace_distance(sim, ew.exact_elementwise_evolution(pattern, inputs, sigma, args.t))
    _emit(f"steps,{budget.steps}\ncopies_consumed,{budget.copies_consumed}\nerror,{err!r}\n", args.out)


def cmd_experiment(args):
    cfg = load_config(args.config) if args.config else default_config(args.name)
    if cfg.experiment != args.name:
        raise QBDLError("bad-config", f"config is for {cfg.experiment!r}, not {args.name!r}")
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.noise_scope:
        changes["noise_scope"] = args.noise_scope
    if args.workers:
        changes["workers"] = args.workers
    if args.trials:
        changes["trials_per_point"] = args.trials
    cfg = cfg.replace(**changes)
    out_dir = Path(args.out or cfg.output_dir)
    out = run_experiment(cfg, out_dir)
    for name, path in sorted(out.paths.items()):
        print(f"{name}: {path}")


def _emit(text: str, out):
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qbdl", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("kernel", help="NNGP kernel of a dataset")
    _add_kernel_args(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_kernel)

    p = sub.add_parser("gp", help="exact GP mean and variance at a query point")
    _add_kernel_args(p)
    p.add_argument("--query", required=True, help="comma-separated input")
    p.add_argument("--noise-var", type=float, default=1e-2)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gp)

    p = sub.add_parser("hhl", help="build and simulate an HHL circuit")
    p.add_argument("--specialized", action="store_true", help="the shallow 2x2 circuit")
    p.add_argument("--matrix", help="CSV file with a Hermitian positive-definite matrix")
    p.add_argument("--vector", help="comma-separated right-hand side")
    p.add_argument("--clock-bits", type=int, default=4)
    p.add_argument("--shots", type=int, default=0, help="also run a noisy swap test with this many shots")
    p.add_argument("--gate-noise", type=float, default=0.0)
    p.add_argument("--meas-noise", type=float, default=0.0)
    p.add_argument("--noise-scope", choices=["touched", "all"], default="touched")
    p.add_argument("--seed", type=int, default=2019)
    p.add_argument("--circuit-out", help="write the circuit in text form")
    p.add_argument("--out")
    p.set_defaults(func=cmd_hhl)

    p = sub.add_parser("swap-test", help="swap test between two real state vectors")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--shots", type=int, default=8192)
    p.add_argument("--gate-noise", type=float, default=0.0)
    p.add_argument("--meas-noise", type=float, default=0.0)
    p.add_argument("--noise-scope", choices=["touched", "all"], default="touched")
    p.add_argument("--seed", type=int, default=2019)
    p.add_argument("--out")
    p.set_defaults(func=cmd_swap_test)

    p = sub.add_parser("elementwise", help="one Trotterized channel against its exact evolution")
    p.add_argument("--pattern", default="h", help="string over h (Hadamard) and o (diagonal outer)")
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--epsilon", type=float, default=0.01)
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--seed", type=int, default=2019)
    p.add_argument("--out")
    p.set_defaults(func=cmd_elementwise)

    p = sub.add_parser("experiment", help="run a configured study")
    p.add_argument("name", choices=["fig2", "fig3", "fig4", "end-to-end", "elementwise"])
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--noise-scope", choices=["touched", "all"])
    p.add_argument("--workers", type=int)
    p.add_argument("--trials", type=int)
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except (QBDLError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0
