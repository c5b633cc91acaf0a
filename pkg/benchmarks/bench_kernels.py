"""Compare the numba and numpy statevector kernels.

    python benchmarks/bench_kernels.py [--repeat 20]

Times single gate applications at several register sizes and one full noisy
trajectory of the 4x4 HHL circuit under each backend.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from qbdl import _accel

_TRAJECTORY = """
import time, numpy as np
from qbdl import _accel, hhl
from qbdl.harness.config import PINNED_MATRIX, PINNED_VECTOR
from qbdl.qsim import NoiseSpec, run_circuit
a = np.array(PINNED_MATRIX); b = np.array(PINNED_VECTOR)
c = hhl.build_hhl(a, b, hhl.HHLConfig.for_matrix(a, 4))
rng = np.random.default_rng(0)
run_circuit(c, NoiseSpec(0.01), rng)
t = time.perf_counter()
for _ in range({n}):
    run_circuit(c, NoiseSpec(0.01), rng)
print(_accel.BACKEND, (time.perf_counter() - t) / {n})
"""


def random_unitary(k, rng):
    z = rng.normal(size=(1 << k, 1 << k)) + 1j * rng.normal(size=(1 << k, 1 << k))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def bench_gates(repeat):
    rng = np.random.default_rng(0)
    print(f"{'qubits':>6} {'gate':>6} {'numpy us':>10} {'numba us':>10} {'speedup':>8}")
    for n in (6, 10, 14):
        state = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
        state /= np.linalg.norm(state)
        for k in (1, 2, 3):
            u = random_unitary(k, rng)
            targets = np.arange(k, dtype=np.int64) * 2 % n
            _accel.apply_matrix_numba(state, u, targets)
            t_np = min(timeit.repeat(lambda: _accel.apply_matrix_numpy(state, u, targets), number=10, repeat=repeat)) / 10
            t_nb = min(timeit.repeat(lambda: _accel.apply_matrix_numba(state, u, targets), number=10, repeat=repeat)) / 10
            print(f"{n:>6} {k:>6} {t_np * 1e6:>10.1f} {t_nb * 1e6:>10.1f} {t_np / t_nb:>8.2f}")


def bench_trajectory(n):
    for flag in ("0", "1"):
        env = dict(os.environ, QBDL_DISABLE_NUMBA=flag)
        out = subprocess.run([sys.executable, "-c", _TRAJECTORY.format(n=n)], env=env, capture_output=True,
                             text=True, check=True)
        backend, secs = out.stdout.split()
        print(f"4x4 HHL trajectory ({backend}): {float(secs) * 1e6:.0f} us")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=20)
    parser.add_argument("--trajectories", type=int, default=200)
    args = parser.parse_args()
    if not _accel.HAVE_NUMBA:
        sys.exit("numba is not installed")
    bench_gates(args.repeat)
    bench_trajectory(args.trajectories)


if __name__ == "__main__":
    main()
