"""Experiment configuration loaded from TOML files.

Every setting has a dotted key; tables and dotted keys are interchangeable,
so ``[noise] scope = "all"`` equals ``noise.scope = "all"``.  Unset keys take
the per-experiment defaults in :data:`DEFAULTS`.
"""
from __future__ import annotations

import dataclasses
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import QBDLError
from ..hhl import SPECIALIZED_A, SPECIALIZED_B

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

EXPERIMENTS = ("fig2", "fig3", "fig4", "end-to-end", "elementwise")
NOISE_TYPES = ("gate", "measurement")

# 4x4 SPD matrix with eigenvalues {1, 2, 3, 4}: Q diag(1,2,3,4) Q^T where Q is
# the QR factor of a standard normal 4x4 draw from default_rng(2019)
PINNED_MATRIX = (
    (2.4565272087655337, -0.03576609828614744, 0.18077744166278845, -0.5513612640995976),
    (-0.03576609828614744, 1.5349867371919543, 0.9704957400463528, 0.23569162034846755),
    (0.18077744166278845, 0.9704957400463528, 2.8546023943277765, 0.649157105915121),
    (-0.5513612640995976, 0.23569162034846755, 0.649157105915121, 3.153883659714735),
)
PINNED_VECTOR = (0.5, 0.5, 0.5, 0.5)

_GRID_2 = tuple(round(0.02 * i, 2) for i in range(11))
_GRID_SWAP = tuple(round(0.01 * i, 2) for i in range(11))

DEMO_POINTS = ((1.0, 0.0, 0.0, 0.0), (0.0, 1.0, 0.0, 0.0), (0.0, 0.0, 1.0, 0.0), (0.0, 0.0, 0.0, 1.0))
DEMO_TARGETS = (1.0, -0.5, 0.25, 0.75)
DEMO_QUERY = (0.6, 0.3, 0.0, 0.2)

DEFAULTS = {
    "fig2": {
        "noise.grid": _GRID_2, "run.trials_per_point": 200, "run.max_repetitions": 10_000,
        "hhl.matrix": tuple(map(tuple, SPECIALIZED_A)), "hhl.vector": tuple(SPECIALIZED_B), "hhl.clock_bits": 2,
        "hhl.specialized": True,
    },
    "fig3": {
        "noise.grid": _GRID_2, "run.trials_per_point": 50, "run.max_repetitions": 2_000,
        "hhl.matrix": PINNED_MATRIX, "hhl.vector": PINNED_VECTOR, "hhl.clock_bits": 4,
    },
    "fig4": {
        "noise.grid": _GRID_SWAP, "run.trials_per_point": 1,
        "hhl.matrix": tuple(map(tuple, SPECIALIZED_A)), "hhl.vector": tuple(SPECIALIZED_B), "hhl.clock_bits": 2,
        "hhl.specialized": True,
    },
    "end-to-end": {"hhl.clock_bits": 6},
    "elementwise": {},
}


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    seed: int = 2019
    output_dir: str = "results"
    noise_grid: tuple = _GRID_2
    noise_types: tuple = NOISE_TYPES
    noise_scope: str = "touched"
    trials_per_point: int = 200
    max_repetitions: int = 10_000
    threshold: float = 0.9
    shots: int = 8192
    workers: int = 1
    clock_bits: int = 4
    specialized: bool = False
    matrix: tuple | None = None
    vector: tuple | None = None
    points: tuple = DEMO_POINTS
    targets: tuple = DEMO_TARGETS
    query: tuple = DEMO_QUERY
    sigma_b_sq: float = 0.0
    sigma_w_sq: float = 2.0
    depth: int = 2
    noise_var: float = 1e-2
    patterns: tuple = ("", "h", "o", "hh", "ho", "oh")
    evolution_time: float = 1.0
    epsilons: tuple = (0.1, 0.05, 0.025)
    instances: int = 5
    dim: int = 2
    source: str = field(default="", compare=False)

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise QBDLError("bad-config", f"experiment {self.experiment!r} not in {EXPERIMENTS}")
        if any(not 0.0 <= p <= 1.0 for p in self.noise_grid):
            raise QBDLError("bad-config", "noise grid values must lie in [0, 1]")
        if set(self.noise_types) - set(NOISE_TYPES):
            raise QBDLError("bad-config", f"noise types {self.noise_types!r}")
        if self.noise_scope not in ("touched", "all"):
            raise QBDLError("bad-config", f"noise scope {self.noise_scope!r}")
        for name in ("trials_per_point", "max_repetitions", "shots", "workers", "clock_bits", "instances"):
            if getattr(self, name) < 1:
                raise QBDLError("bad-config", f"{name} must be >= 1")

    def to_dict(self) -> dict:
        out = {}
        for key, name in _KEYS.items():
            value = getattr(self, name)
            out[key] = _plain(value)
        return out

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


def _plain(value):
    if isinstance(value, tuple):
        return [_plain(v) for v in value]
    return value


# dotted key -> field name
_KEYS = {
    "experiment": "experiment",
    "seed": "seed",
    "output_dir": "output_dir",
    "noise.grid": "noise_grid",
    "noise.types": "noise_types",
    "noise.scope": "noise_scope",
    "run.trials_per_point": "trials_per_point",
    "run.max_repetitions": "max_repetitions",
    "run.threshold": "threshold",
    "run.shots": "shots",
    "run.workers": "workers",
    "hhl.clock_bits": "clock_bits",
    "hhl.specialized": "specialized",
    "hhl.matrix": "matrix",
    "hhl.vector": "vector",
    "dataset.points": "points",
    "dataset.targets": "targets",
    "dataset.query": "query",
    "kernel.sigma_b_sq": "sigma_b_sq",
    "kernel.sigma_w_sq": "sigma_w_sq",
    "kernel.depth": "depth",
    "gp.noise_var": "noise_var",
    "elementwise.patterns": "patterns",
    "elementwise.t": "evolution_time",
    "elementwise.epsilons": "epsilons",
    "elementwise.instances": "instances",
    "elementwise.dim": "dim",
}
# keys naming a file whose numbers replace the inline value
_FILE_KEYS = {"hhl.matrix_file": "hhl.matrix", "hhl.vector_file": "hhl.vector", "dataset.file": "dataset"}


def _flatten(table: dict, prefix: str = "") -> dict:
    out = {}
    for key, value in table.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            out.update(_flatten(value, name + "."))
        else:
            out[name] = value
    return out


def _tuplify(value):
    if isinstance(value, list):
        return tuple(_tuplify(v) for v in value)
    return value


def _load_numbers(path: Path) -> np.ndarray:
    try:
        return np.loadtxt(path, delimiter=",", ndmin=2, comments="#")
    except OSError as exc:
        raise QBDLError("bad-config", f"cannot read {path}: {exc}") from exc


def config_from_mapping(flat: dict, base_dir: Path | None = None, source: str = "") -> ExperimentConfig:
    """Build a config from dotted keys, filling per-experiment defaults."""
    flat = dict(flat)
    experiment = flat.get("experiment")
    if experiment is None:
        raise QBDLError("bad-config", "missing 'experiment'")
    unknown = set(flat) - set(_KEYS) - set(_FILE_KEYS)
    if unknown:
        raise QBDLError("unknown-config-key", ", ".join(sorted(unknown)))
    values = dict(DEFAULTS.get(experiment, {}))
    base_dir = base_dir or Path.cwd()
    for key, value in flat.items():
        if key in _FILE_KEYS:
            arr = _load_numbers(base_dir / value)
            if key == "dataset.file":
                values["dataset.points"] = tuple(map(tuple, arr[:, :-1]))
                values["dataset.targets"] = tuple(arr[:, -1])
            elif key == "hhl.vector_file":
                values["hhl.vector"] = tuple(arr.reshape(-1))
            else:
                values["hhl.matrix"] = tuple(map(tuple, arr))
        else:
            values[key] = _tuplify(value)
    kwargs = {_KEYS[k]: v for k, v in values.items()}
    for name in ("noise_grid", "epsilons"):
        if name in kwargs:
            kwargs[name] = tuple(float(p) for p in kwargs[name])
    return ExperimentConfig(source=source, **kwargs)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        with path.open("rb") as fh:
            table = tomllib.load(fh)
    except OSError as exc:
        raise QBDLError("bad-config", f"cannot read {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise QBDLError("bad-config", f"{path}: {exc}") from exc
    return config_from_mapping(_flatten(table), path.parent, str(path))


def default_config(experiment: str, **overrides) -> ExperimentConfig:
    return config_from_mapping({"experiment": experiment}).replace(**overrides)
