"""Figures for a finished run: density heatmaps, profile overlays and sweep curves."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..errors import MissingArtifact
from .experiment import RunRecord
from .svg import heatmap, line_plot, read_table, write_svg

OVERLAY_LABELS = {
    "projection": "2D Fokker-Planck, projected on y",
    "reduced": "reduced 1D Fokker-Planck",
    "steady_state": "exp(-2G/beta^2), normalized",
}


def _heatmap_for(case_dir: Path) -> Path | None:
    snap = case_dir / "fp2d_final.csv"
    if not snap.exists():
        return None
    meta = json.loads(snap.with_suffix(".json").read_text())
    table = read_table(snap)
    values = np.asarray(table["p"]).reshape(meta["nx"], meta["ny"])
    title = f"{case_dir.name}: density at t = {meta['time']:.6g}"
    return write_svg(case_dir / "heatmap.svg", heatmap(values, tuple(meta["domain"]), title))


def _overlay_for(case_dir: Path) -> Path | None:
    prof = case_dir / "profiles.csv"
    if not prof.exists():
        return None
    table = read_table(prof)
    if not all(k in table for k in OVERLAY_LABELS):
        return None
    series = [(OVERLAY_LABELS[k], table["y"], table[k]) for k in OVERLAY_LABELS]
    svg = line_plot(series, f"{case_dir.name}: densities along y", "y", "density")
    return write_svg(case_dir / "overlay.svg", svg)


def _sweep_plots(run_dir: Path) -> list[Path]:
    path = run_dir / "sweep.csv"
    if not path.exists():
        return []
    t = read_table(path)
    w_values = sorted(set(np.asarray(t["w_plus"]).tolist()))
    out = []
    for column, label, name in (("reaction_time", "reaction time", "sweep_reaction_time.svg"),
                                ("performance", "performance", "sweep_performance.svg")):
        series = []
        for w in w_values:
            sel = np.asarray(t["w_plus"]) == w
            order = np.argsort(np.asarray(t["delta_lambda"])[sel], kind="stable")
            series.append((f"w+ = {w:g}", np.asarray(t["delta_lambda"])[sel][order],
                           np.asarray(t[column])[sel][order]))
        svg = line_plot(series, f"{label} vs bias", "delta lambda", label, markers=True)
        out.append(write_svg(run_dir / name, svg))
    return out


def emit_plots(record_or_dir) -> list[Path]:
    """Write every figure the run's artifacts allow and add them to the manifest.

    Raises :class:`MissingArtifact` when the run has nothing plottable.
    """
    record = record_or_dir if isinstance(record_or_dir, RunRecord) else RunRecord.load(record_or_dir)
    run_dir = Path(record.run_dir)
    files: list[Path] = []
    for case_dir in sorted(p for p in run_dir.iterdir() if p.is_dir()):
        for maker in (_heatmap_for, _overlay_for):
            f = maker(case_dir)
            if f is not None:
                files.append(f)
    files.extend(_sweep_plots(run_dir))
    if not files:
        raise MissingArtifact(f"no plottable artifacts in {run_dir}")
    for f in files:
        record.add_file(f)
    record.save()
    return files
