"""CSV tables, SVG plots and the JSON run manifest for a sweep."""
from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .sweeps import BOUND_KINDS, SweepRow

CSV_HEADER = ["sweep_value", "scenario", "rmse_m", "bound_kind", "bound_m", "trials", "failed"]
X_LABELS = {"noise": "noise variance sigma^2 (W^2)", "alpha": "decay rate alpha (1/h)",
            "path": "distance from room centre (m)"}


def ensure_writable(out_dir) -> Path:
    """Create ``out_dir`` and prove it is writable; raises ``OSError`` otherwise."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with tempfile.NamedTemporaryFile(dir=out, prefix=".probe-"):
        pass
    return out


def _fmt(x: float) -> str:
    return "nan" if not np.isfinite(x) else repr(float(x))


def csv_text(rows: list[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        for kind in BOUND_KINDS[r.scenario]:
            w.writerow([_fmt(r.sweep_value), r.scenario, _fmt(r.rmse), kind,
                        _fmt(r.bounds.get(kind, float("nan"))), r.trials_used, int(r.failed)])
    return buf.getvalue()


def _groups(rows: list[SweepRow], kind: str) -> dict:
    """Noise sweeps fit one table; alpha and path sweeps get one table per noise level."""
    if kind == "noise":
        return {"": rows}
    out: dict = {}
    for r in rows:
        out.setdefault(f"_sigma2_{r.sigma2:g}", []).append(r)
    return out


def _plot(rows: list[SweepRow], kind: str, path: Path, title: str):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "vlp"
    fig, ax = plt.subplots(figsize=(6.4, 4.4))
    for s in sorted({r.scenario for r in rows}):
        sub = [r for r in rows if r.scenario == s]
        x = np.array([r.sweep_value for r in sub])
        ax.plot(x, [r.rmse for r in sub], marker="o", label=f"RMSE S{s}")
        for kind_b in BOUND_KINDS[s]:
            ax.plot(x, [r.bounds.get(kind_b, np.nan) for r in sub], ls="--",
                    label=f"sqrt {kind_b.upper()} S{s}")
    ax.set_yscale("log")
    if kind == "noise":
        ax.set_xscale("log")
        ax.invert_xaxis()
    ax.set_xlabel(X_LABELS[kind])
    ax.set_ylabel("m")
    ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def emit_outputs(rows: list[SweepRow], cfg, kind: str, out_dir=None,
                 wall_time_s: float | None = None, plots: bool = True) -> list[Path]:
    """Write CSV(s), SVG plot(s) and ``manifest_<kind>.json``; returns the paths written."""
    if not rows:
        raise ValueError("no rows to write")
    out = ensure_writable(out_dir or cfg.outputs)
    written = []
    for suffix, group in _groups(rows, kind).items():
        stem = f"{kind}_sweep{suffix}"
        p = out / f"{stem}.csv"
        p.write_text(csv_text(group))
        written.append(p)
        if plots:
            svg = out / f"{stem}.svg"
            _plot(group, kind, svg, stem.replace("_", " "))
            written.append(svg)
    manifest = {
        "kind": kind,
        "config": cfg.raw,
        "master_seed": cfg.master_seed,
        "trials": cfg.trials,
        "code_version": __version__,
        "wall_time_s": wall_time_s,
        "files": [p.name for p in written],
        "failures": [{"sweep_value": r.sweep_value, "scenario": r.scenario, "errors": r.errors}
                     for r in rows if r.failed],
    }
    mp = out / f"manifest_{kind}.json"
    mp.write_text(json.dumps(manifest, indent=2, default=str) + os.linesep)
    written.append(mp)
    return written
