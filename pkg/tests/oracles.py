"""Independent reference computations used by the tests.

Each oracle is written from the defining formula with plain loops or dense
linear algebra, never by calling the code under test.
"""
import itertools
import math

import numpy as np


def random_density(rng, d):
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    m = g @ g.conj().T
    return m / np.trace(m).real


def random_spd(rng, n, lo=1.0, hi=4.0, force_ends=True):
    q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    eigs = rng.uniform(lo, hi, size=n)
    if force_ends:
        eigs[0], eigs[-1] = lo, hi
    a = q @ np.diag(eigs) @ q.T
    return (a + a.T) / 2


def base_kernel_loop(x, sigma_b_sq, sigma_w_sq):
    n, d = x.shape
    out = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            out[i, j] = sigma_b_sq + sigma_w_sq * sum(x[i, a] * x[j, a] for a in range(d)) / d
    return out


def relu_expectation_mc(k, sigma_b_sq, sigma_w_sq, samples, rng, batch=250_000):
    """Monte-Carlo ``sigma_b^2 + sigma_w^2 E[relu(z_i) relu(z_j)]``, z ~ N(0, k).

    Returns (estimate, standard error) matrices.
    """
    n = k.shape[0]
    chol = np.linalg.cholesky(k + 1e-15 * np.eye(n))
    total = np.zeros((n, n))
    total_sq = np.zeros((n, n))
    done = 0
    while done < samples:
        m = min(batch, samples - done)
        z = rng.standard_normal((m, n)) @ chol.T
        r = np.maximum(z, 0.0)
        prod = r[:, :, None] * r[:, None, :]
        total += prod.sum(axis=0)
        total_sq += (prod ** 2).sum(axis=0)
        done += m
    mean = total / samples
    var = total_sq / samples - mean ** 2
    se = np.sqrt(var / samples)
    return sigma_b_sq + sigma_w_sq * mean, sigma_w_sq * se


def hadamard_loop(a, b):
    d = a.shape[0]
    out = np.zeros((d, d), dtype=complex)
    for j in range(d):
        for k in range(d):
            out[j, k] = a[j, k] * b[j, k]
    return out


def diag_outer_loop(a, b):
    d = a.shape[0]
    out = np.zeros((d, d), dtype=complex)
    for j in range(d):
        for k in range(d):
            out[j, k] = a[j, j] * b[k, k]
    return out


def _unit(d, a, b):
    m = np.zeros((d, d))
    m[a, b] = 1.0
    return m


def stilde_expansion(ops, d):
    """Sum over (j, k) of the Kronecker products the recursion describes.

    Written in closed form: inputs up to the last diagonal-outer step carry
    ``|j><j|``, the input that step brings in carries ``|k><k|``, later inputs
    carry ``|j><k|``, and the target carries ``|k><j|``.
    """
    r = len(ops) + 1
    last_o = max((i + 1 for i, op in enumerate(ops) if op == "o"), default=0)
    total = np.zeros((d ** (r + 1), d ** (r + 1)))
    for j, k in itertools.product(range(d), repeat=2):
        term = np.ones((1, 1))
        for i in range(1, r + 1):
            if i <= last_o:
                f = _unit(d, j, j)
            elif i == last_o + 1 and last_o > 0:
                f = _unit(d, k, k)
            else:
                f = _unit(d, j, k)
            term = np.kron(term, f)
        total += np.kron(term, _unit(d, k, j))
    return total


def chain_loop(ops, mats):
    out = mats[0]
    for op, m in zip(ops, mats[1:]):
        out = hadamard_loop(out, m) if op == "h" else diag_outer_loop(out, m)
    return out


def expm_series(h, t, terms=30):
    out = np.eye(h.shape[0], dtype=complex)
    term = np.eye(h.shape[0], dtype=complex)
    for n in range(1, terms):
        term = term @ (-1j * t * h) / n
        out = out + term
    return out


def trace_distance(a, b):
    diff = a - b
    return 0.5 * np.abs(np.linalg.eigvalsh((diff + diff.conj().T) / 2)).sum()


def bootstrap_ci(samples, statistic, rng, resamples=2000, level=0.99):
    """Percentile bootstrap over independent samples (one array per group)."""
    stats = np.empty(resamples)
    for b in range(resamples):
        stats[b] = statistic(*[s[rng.integers(0, len(s), len(s))] for s in samples])
    lo, hi = np.quantile(stats, [(1 - level) / 2, (1 + level) / 2])
    return lo, hi


def qpe_outcome_probability(phase, m, k):
    """Probability that m-bit phase estimation of e^{2 pi i phase} reads k."""
    size = 1 << m
    delta = phase - k / size
    if abs(delta - round(delta)) < 1e-15:
        return 1.0
    return abs(sum(np.exp(2j * math.pi * delta * j) for j in range(size)) / size) ** 2
