"""CSV schemas, deterministic per-trial seeds and the run manifest."""
from __future__ import annotations

import csv
import io
import json
import math
import platform
from pathlib import Path

import numpy as np

from .. import __version__, _accel

TRIAL_COLUMNS = ("experiment", "noise_type", "p", "seed", "trial", "ancilla_bit", "fidelity", "repetitions", "success")
SUMMARY_COLUMNS = ("experiment", "noise_type", "p", "trials", "mean_fidelity", "mean_repetitions",
                   "max_repetitions", "success_rate")
SWAP_COLUMNS = ("experiment", "noise_type", "p", "seed", "shots", "attempts", "p_success", "fidelity")
END_TO_END_COLUMNS = ("quantity", "classical", "quantum", "relative_error", "kappa", "clock_bits", "qubits",
                      "success_probability")
ELEMENTWISE_COLUMNS = ("pattern", "order", "t", "epsilon", "steps", "copies_consumed", "instance", "seed",
                       "error", "status")


def trial_seed(master: int, *key: int) -> int:
    """Seed for one trial, derived only from the master seed and its position."""
    ss = np.random.SeedSequence(entropy=master, spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0])


def _cell(value) -> str:
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return "nan" if math.isnan(value) else repr(value)
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


def csv_text(columns, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(row[c]) for c in columns])
    return buf.getvalue()


def write_csv(path: Path, columns, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(csv_text(columns, rows), encoding="utf-8")
    return path


def read_csv(path) -> list:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def summarize_trials(rows, experiment: str) -> list:
    """Per (noise type, p): mean fidelity, mean and max repetitions, success rate."""
    groups = {}
    for row in rows:
        groups.setdefault((row["noise_type"], row["p"]), []).append(row)
    out = []
    for (kind, p), grp in groups.items():
        reps = [r["repetitions"] for r in grp]
        out.append({
            "experiment": experiment,
            "noise_type": kind,
            "p": p,
            "trials": len(grp),
            "mean_fidelity": float(np.mean([r["fidelity"] for r in grp])),
            "mean_repetitions": float(np.mean(reps)),
            "max_repetitions": int(max(reps)),
            "success_rate": float(np.mean([r["success"] for r in grp])),
        })
    return out


def versions() -> dict:
    import scipy

    try:
        import numba
        numba_version = numba.__version__
    except ImportError:
        numba_version = None

    return {
        "qbdl": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "numba": numba_version,
        "backend": _accel.BACKEND,
    }


def write_manifest(out_dir: Path, config: dict, outputs) -> Path:
    out_dir = Path(out_dir)
    manifest = {
        "config": config,
        "seed": config.get("seed"),
        "versions": versions(),
        "outputs": sorted(Path(p).name for p in outputs),
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path
