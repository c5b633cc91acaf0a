"""Exact GP posterior mean and variance, used as ground truth."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import QBDLError
from .kernel import KernelMatrix

DEFAULT_NOISE_VAR = 1e-2


def solve_spd(m, b) -> np.ndarray:
    """Solve ``m z = b`` for symmetric positive-definite ``m`` by Cholesky."""
    m = np.asarray(m, dtype=float)
    b = np.asarray(b, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or b.shape[0] != m.shape[0]:
        raise QBDLError("shape-mismatch", f"{m.shape} vs {b.shape}")
    if np.abs(m - m.T).max() > 1e-10:
        raise QBDLError("not-symmetric")
    try:
        factor = scipy.linalg.cho_factor(m, lower=True, check_finite=True)
    except np.linalg.LinAlgError as exc:
        raise QBDLError("not-positive-definite", str(exc)) from exc
    return scipy.linalg.cho_solve(factor, b)


@dataclass(frozen=True)
class GPModel:
    """Training covariance, observation noise variance and targets."""

    kernel: np.ndarray
    targets: np.ndarray
    noise_var: float = DEFAULT_NOISE_VAR

    def __post_init__(self):
        k = self.kernel.values if isinstance(self.kernel, KernelMatrix) else self.kernel
        k = np.asarray(k, dtype=float)
        y = np.asarray(self.targets, dtype=float).reshape(-1)
        if k.ndim != 2 or k.shape[0] != k.shape[1] or y.shape[0] != k.shape[0]:
            raise QBDLError("shape-mismatch", f"kernel {k.shape}, targets {y.shape}")
        if self.noise_var < 0:
            raise QBDLError("bad-noise-variance", repr(self.noise_var))
        object.__setattr__(self, "kernel", k)
        object.__setattr__(self, "targets", y)

    @property
    def n(self) -> int:
        return self.targets.shape[0]

    def covariance(self) -> np.ndarray:
        """``K + sigma_n^2 I``."""
        return self.kernel + self.noise_var * np.eye(self.n)


@dataclass(frozen=True)
class PredictionQuery:
    k_star: np.ndarray
    k_ss: float

    def __post_init__(self):
        ks = np.asarray(self.k_star, dtype=float).reshape(-1)
        if not np.all(np.isfinite(ks)) or not np.isfinite(self.k_ss):
            raise QBDLError("non-finite", "query")
        if self.k_ss <= 0:
            raise QBDLError("bad-query", f"k_ss={self.k_ss!r}")
        object.__setattr__(self, "k_star", ks)


def _check(model: GPModel, query: PredictionQuery):
    if query.k_star.shape[0] != model.n:
        raise QBDLError("shape-mismatch", f"k_star has {query.k_star.shape[0]} entries, model has {model.n}")


def gp_mean(model: GPModel, query: PredictionQuery) -> float:
    _check(model, query)
    return float(query.k_star @ solve_spd(model.covariance(), model.targets))


def gp_variance(model: GPModel, query: PredictionQuery, tol: float = 1e-10) -> float:
    _check(model, query)
    var = query.k_ss - float(query.k_star @ solve_spd(model.covariance(), query.k_star))
    if var < -tol:
        raise QBDLError("variance-negative", repr(var))
    return float(var)
