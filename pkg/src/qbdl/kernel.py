"""NNGP covariance for deep ReLU networks.

Layer 0 is the linear base kernel ``sigma_b^2 + sigma_w^2 <x, x'> / d_in``.
Each further layer applies the ReLU arc-cosine map to the previous kernel.
"""
from __future__ import annotations

import enum
import io
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import Chebyshev, Polynomial

from .errors import QBDLError
from .qsim.state import DensityOp

CLAMP_TOL = 1e-9


class KernelForm(str, enum.Enum):
    # standard arc-cosine closed form: sin(theta) + (pi - theta) cos(theta)
    CORRECTED = "corrected"
    # the bracket exactly as printed: arcsin(theta) - (pi - theta) arccos(theta);
    # not PSD, kept only to document the discrepancy
    PAPER_LITERAL = "paper_literal"


@dataclass(frozen=True)
class HyperParams:
    sigma_b_sq: float = 0.0
    sigma_w_sq: float = 1.0
    depth: int = 0
    form: KernelForm = KernelForm.CORRECTED

    def __post_init__(self):
        object.__setattr__(self, "form", KernelForm(self.form))
        if not self.sigma_b_sq >= 0:
            raise QBDLError("bad-hyperparameter", f"sigma_b_sq={self.sigma_b_sq!r}")
        if not self.sigma_w_sq > 0:
            raise QBDLError("bad-hyperparameter", f"sigma_w_sq={self.sigma_w_sq!r}")
        if self.depth < 0:
            raise QBDLError("bad-hyperparameter", f"depth={self.depth!r}")


@dataclass(frozen=True)
class Dataset:
    """Training inputs (n x d_in) and optional targets (length n)."""

    points: np.ndarray
    targets: np.ndarray | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        if pts.size == 0 or pts.ndim != 2:
            raise QBDLError("empty-dataset")
        if not np.all(np.isfinite(pts)):
            raise QBDLError("non-finite", "dataset points")
        object.__setattr__(self, "points", pts)
        if self.targets is not None:
            y = np.asarray(self.targets, dtype=float).reshape(-1)
            if y.shape[0] != pts.shape[0]:
                raise QBDLError("shape-mismatch", f"{y.shape[0]} targets for {pts.shape[0]} points")
            if not np.all(np.isfinite(y)):
                raise QBDLError("non-finite", "dataset targets")
            object.__setattr__(self, "targets", y)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d_in(self) -> int:
        return self.points.shape[1]

    @classmethod
    def from_text(cls, source, delimiter=",", has_targets=True) -> "Dataset":
        """Parse rows of numbers; with ``has_targets`` the last column is y."""
        if isinstance(source, str) and "\n" in source:
            source = io.StringIO(source)
        arr = np.loadtxt(source, delimiter=delimiter, ndmin=2, comments="#")
        if arr.size == 0:
            raise QBDLError("empty-dataset")
        if has_targets:
            if arr.shape[1] < 2:
                raise QBDLError("shape-mismatch", "need at least one input column and a target")
            return cls(arr[:, :-1], arr[:, -1])
        return cls(arr)


@dataclass(frozen=True)
class KernelMatrix:
    layer: int
    values: np.ndarray
    hyper: HyperParams
    clamp_events: int = 0

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def to_text(self, delimiter=",") -> str:
        h = self.hyper
        buf = io.StringIO()
        header = (f"layer={self.layer} sigma_b_sq={h.sigma_b_sq!r} "
                  f"sigma_w_sq={h.sigma_w_sq!r} form={h.form.value}")
        np.savetxt(buf, self.values, delimiter=delimiter, header=header, fmt="%.17g")
        return buf.getvalue()

    @classmethod
    def from_text(cls, text: str, delimiter=",") -> "KernelMatrix":
        first = text.splitlines()[0].lstrip("# ").split()
        meta = dict(kv.split("=", 1) for kv in first)
        hyper = HyperParams(float(meta["sigma_b_sq"]), float(meta["sigma_w_sq"]),
                            int(meta["layer"]), KernelForm(meta["form"]))
        values = np.loadtxt(io.StringIO(text), delimiter=delimiter, ndmin=2)
        return cls(int(meta["layer"]), values, hyper)


def base_kernel(data: Dataset, hyper: HyperParams) -> KernelMatrix:
    x = data.points
    if x.shape[0] == 0:
        raise QBDLError("empty-dataset")
    k0 = hyper.sigma_b_sq + hyper.sigma_w_sq * (x @ x.T) / data.d_in
    return KernelMatrix(0, (k0 + k0.T) / 2, hyper)


def relu_layer_step(prev: KernelMatrix, hyper: HyperParams | None = None) -> KernelMatrix:
    """One layer of the ReLU recursion applied to ``prev``."""
    hyper = prev.hyper if hyper is None else hyper
    k = prev.values
    diag = np.diag(k).copy()
    if np.any(diag <= 0):
        raise QBDLError("degenerate-diagonal", f"min diagonal {diag.min()!r}")
    scale = np.sqrt(np.outer(diag, diag))
    cos = k / scale
    np.fill_diagonal(cos, 1.0)
    overshoot = np.abs(cos) > 1.0
    events = int(overshoot.sum())
    if hyper.form is KernelForm.CORRECTED and np.any(np.abs(cos) > 1.0 + CLAMP_TOL):
        raise QBDLError("angle-overflow", f"normalized kernel reaches {np.abs(cos).max()!r}; input not PSD")
    theta = np.arccos(np.clip(cos, -1.0, 1.0))
    if hyper.form is KernelForm.CORRECTED:
        bracket = np.sin(theta) + (np.pi - theta) * np.cos(theta)
    else:
        if np.any(theta > 1.0):
            raise QBDLError("paper-literal-domain", f"angle {theta.max():.4f} outside arcsin/arccos domain [-1, 1]")
        bracket = np.arcsin(theta) - (np.pi - theta) * np.arccos(theta)
    out = hyper.sigma_b_sq + hyper.sigma_w_sq / (2 * np.pi) * scale * bracket
    return KernelMatrix(prev.layer + 1, (out + out.T) / 2, hyper, prev.clamp_events + events)


def kernel_to_layer(data: Dataset, hyper: HyperParams) -> KernelMatrix:
    k = base_kernel(data, hyper)
    for _ in range(hyper.depth):
        k = relu_layer_step(k, hyper)
    return k


def next_power_of_two(n: int) -> int:
    return 1 << max(n - 1, 0).bit_length()


def pad_to_power_of_two(mat: np.ndarray, fill: float = 0.0) -> np.ndarray:
    """Embed ``mat`` in the top-left block; the new diagonal gets ``fill``."""
    n = mat.shape[0]
    size = next_power_of_two(n)
    out = np.zeros((size, size), dtype=mat.dtype)
    out[:n, :n] = mat
    out[range(n, size), range(n, size)] = fill
    return out


def density_encode(kernel: KernelMatrix) -> DensityOp:
    values = kernel.values if isinstance(kernel, KernelMatrix) else np.asarray(kernel, dtype=float)
    tr = float(np.trace(values))
    if tr == 0:
        raise QBDLError("zero-trace")
    return DensityOp(pad_to_power_of_two(values) / tr)


def relu_angular(c):
    """Normalized ReLU map of the cosine c: ``(sin(acos c) + (pi - acos c) c) / 2pi``."""
    c = np.clip(c, -1.0, 1.0)
    th = np.arccos(c)
    return (np.sin(th) + (np.pi - th) * c) / (2 * np.pi)


@dataclass(frozen=True)
class PolySpec:
    """``sum_r coefficients[r] * rho^(r)`` where power r uses ``patterns[r]``.

    ``patterns[r]`` is a string over ``h`` (Hadamard) / ``o`` (diagonal outer)
    of length ``r - 1``; ``patterns[0]`` is unused.
    """

    coefficients: tuple
    patterns: tuple
    fit_residual: float = field(default=0.0)

    def __post_init__(self):
        coeffs = tuple(float(c) for c in self.coefficients)
        if len(coeffs) < 2:
            raise QBDLError("bad-degree", "need at least a linear term")
        if len(self.patterns) != len(coeffs):
            raise QBDLError("shape-mismatch", "one pattern per power")
        for r, pat in enumerate(self.patterns):
            if r >= 1 and (len(pat) != r - 1 or set(pat) - {"h", "o"}):
                raise QBDLError("bad-pattern", f"power {r}: {pat!r}")
        if not math.isfinite(self.fit_residual):
            raise QBDLError("non-finite", "fit residual")
        object.__setattr__(self, "coefficients", coeffs)
        object.__setattr__(self, "patterns", tuple(self.patterns))

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def __call__(self, c):
        return Polynomial(self.coefficients)(c)

    @classmethod
    def hadamard_only(cls, coefficients, fit_residual=0.0) -> "PolySpec":
        pats = tuple("h" * max(r - 1, 0) for r in range(len(coefficients)))
        return cls(tuple(coefficients), pats, fit_residual)


def fit_kernel_polynomial(degree: int, form: KernelForm = KernelForm.CORRECTED, grid_points: int = 10_000) -> PolySpec:
    """Chebyshev-node interpolant of :func:`relu_angular` in the power basis."""
    if degree < 1:
        raise QBDLError("bad-degree", repr(degree))
    if KernelForm(form) is not KernelForm.CORRECTED:
        raise QBDLError("unsupported-form", "only the corrected form has a bounded angular map")
    poly = Chebyshev.interpolate(relu_angular, degree).convert(kind=Polynomial)
    coeffs = np.zeros(degree + 1)
    coeffs[: poly.coef.shape[0]] = poly.coef
    grid = np.linspace(-1.0, 1.0, grid_points)
    residual = float(np.abs(Polynomial(coeffs)(grid) - relu_angular(grid)).max())
    return PolySpec.hadamard_only(coeffs, residual)
