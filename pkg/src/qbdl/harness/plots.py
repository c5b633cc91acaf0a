"""SVG plots built from the harness CSVs.

Output is byte-stable: the SVG id salt is fixed and no date is embedded.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib
from matplotlib.figure import Figure

from ..errors import QBDLError
from .records import ELEMENTWISE_COLUMNS, SUMMARY_COLUMNS, SWAP_COLUMNS, read_csv

_SCHEMAS = {
    "fidelity": SUMMARY_COLUMNS,
    "repetitions": SUMMARY_COLUMNS,
    "swap": SWAP_COLUMNS,
    "elementwise": ELEMENTWISE_COLUMNS,
}


def _save(fig: Figure, path: Path) -> Path:
    with matplotlib.rc_context({"svg.hashsalt": "qbdl", "svg.fonttype": "path"}):
        fig.savefig(path, format="svg", metadata={"Date": None})
    return path


def _by_type(rows):
    groups = {}
    for r in rows:
        groups.setdefault(r["noise_type"], []).append(r)
    for grp in groups.values():
        grp.sort(key=lambda r: float(r["p"]))
    return groups


def _fidelity(rows, stem, out_dir):
    paths = []
    for kind, grp in _by_type(rows).items():
        fig = Figure(figsize=(5, 3.5))
        ax = fig.add_subplot()
        ax.plot([float(r["p"]) for r in grp], [float(r["mean_fidelity"]) for r in grp], marker="o",
                label="mean fidelity")
        ax.set_xlabel(f"{kind} noise probability")
        ax.set_ylabel("fidelity")
        ax.set_ylim(-0.02, 1.02)
        ax.legend()
        fig.tight_layout()
        paths.append(_save(fig, out_dir / f"{stem}_fidelity_{kind}.svg"))
    return paths


def _repetitions(rows, stem, out_dir):
    paths = []
    for kind, grp in _by_type(rows).items():
        ps = [float(r["p"]) for r in grp]
        fig = Figure(figsize=(5, 3.5))
        ax = fig.add_subplot()
        ax.plot(ps, [float(r["mean_repetitions"]) for r in grp], linestyle="-", label="mean")
        ax.plot(ps, [float(r["max_repetitions"]) for r in grp], linestyle="--", label="maximum")
        ax.set_xlabel(f"{kind} noise probability")
        ax.set_ylabel("repetitions to success")
        ax.set_yscale("log")
        ax.legend()
        fig.tight_layout()
        paths.append(_save(fig, out_dir / f"{stem}_repetitions_{kind}.svg"))
    return paths


def _swap(rows, stem, out_dir):
    labels = [f"{r['noise_type'][0]} {float(r['p']):g}" for r in rows]
    fig = Figure(figsize=(max(5, 0.35 * len(rows)), 3.5))
    ax = fig.add_subplot()
    colors = ["tab:blue" if r["noise_type"] == "gate" else "tab:orange" for r in rows]
    ax.bar(range(len(rows)), [float(r["p_success"]) for r in rows], color=colors)
    ax.set_xticks(range(len(rows)), labels, rotation=90, fontsize=7)
    ax.set_ylabel("P(success)")
    ax.set_ylim(0, 1.02)
    handles = [matplotlib.patches.Patch(color="tab:blue", label="gate"),
               matplotlib.patches.Patch(color="tab:orange", label="measurement")]
    ax.legend(handles=handles)
    fig.tight_layout()
    return [_save(fig, out_dir / f"{stem}.svg")]


def _elementwise(rows, stem, out_dir):
    fig = Figure(figsize=(5, 3.5))
    ax = fig.add_subplot()
    series = {}
    for r in rows:
        if r["status"] != "ok":
            continue
        series.setdefault(r["pattern"], {}).setdefault(int(r["steps"]), []).append(float(r["error"]))
    for pattern, by_steps in series.items():
        steps = sorted(by_steps)
        ax.plot(steps, [sum(by_steps[s]) / len(by_steps[s]) for s in steps], marker="o",
                label=pattern or "single input")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("channel steps")
    ax.set_ylabel("trace distance to exact")
    ax.legend()
    fig.tight_layout()
    return [_save(fig, out_dir / f"{stem}.svg")]


_DRAW = {"fidelity": _fidelity, "repetitions": _repetitions, "swap": _swap, "elementwise": _elementwise}


def emit_plot(csv_path, kind: str, out_dir=None) -> list:
    """Render ``csv_path`` as SVG; returns the written paths."""
    if kind not in _DRAW:
        raise QBDLError("bad-plot-kind", kind)
    csv_path = Path(csv_path)
    rows = read_csv(csv_path)
    if not rows:
        raise QBDLError("empty-input", str(csv_path))
    missing = set(_SCHEMAS[kind]) - set(rows[0])
    if missing:
        raise QBDLError("schema-mismatch", f"{csv_path.name} lacks {sorted(missing)}")
    out_dir = Path(out_dir) if out_dir is not None else csv_path.parent
    out_dir.mkdir(parents=True, exist_ok=True)
    return _DRAW[kind](rows, csv_path.stem, out_dir)
