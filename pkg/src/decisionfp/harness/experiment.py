"""Experiment orchestration: backends per case, the three-well sweep, and persistence.

A run lives in ``<output root>/<config hash>/``. Every file written there is
listed in ``record.json`` with its SHA-256. Apart from ``record.json``, which
also carries timestamps, the directory content depends only on the config
(seed included).
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from ..errors import DecisionFPError, MissingArtifact
from ..fp1d import (ObservableReport, partition_wells, performance, performance_at, reaction_time, solve_fp1d,
                    steady_state)
from ..fp2d import central_state, default_initial_density, project_onto_direction, solve_fp2d, write_snapshot
from ..grids import Grid2, local_maxima
from ..model import ModelParams, WilsonCowanField, find_equilibria
from ..reduction import build_manifold
from ..sde import EnsembleState2, TabulatedDrift, histogram_density, run_em_2d, sample_first_passage
from ..threewell import three_well_manifold
from .config import ExperimentConfig

logger = logging.getLogger(__name__)

RECORD_NAME = "record.json"


def config_hash(config: ExperimentConfig) -> str:
    blob = json.dumps(config.to_dict(), sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def sha256_file(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return "nan"
    return f"{float(v):.10g}"


def _write_csv(path: Path, header, rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


@dataclass
class RunRecord:
    config_hash: str
    run_dir: Path
    started: str = ""
    finished: str = ""
    reports: list[dict] = field(default_factory=list)
    comparisons: list[dict] = field(default_factory=list)
    sweep: list[dict] = field(default_factory=list)
    manifest: dict[str, str] = field(default_factory=dict)

    @property
    def failed(self) -> list[dict]:
        return [r for r in self.reports if r["status"] != "ok"]

    def report(self, case: str, backend: str) -> dict:
        for r in self.reports:
            if r["case"] == case and r["backend"] == backend:
                return r
        raise KeyError((case, backend))

    def comparison(self, case: str, a: str, b: str) -> float:
        for c in self.comparisons:
            if c["case"] == case and {c["a"], c["b"]} == {a, b}:
                return c["l1"]
        raise KeyError((case, a, b))

    def add_file(self, path: Path) -> None:
        self.manifest[str(Path(path).relative_to(self.run_dir))] = sha256_file(path)

    def to_dict(self) -> dict:
        return {
            "config_hash": self.config_hash,
            "started": self.started,
            "finished": self.finished,
            "reports": self.reports,
            "comparisons": self.comparisons,
            "sweep": self.sweep,
            "manifest": dict(sorted(self.manifest.items())),
        }

    def save(self) -> Path:
        path = self.run_dir / RECORD_NAME
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True, default=_json_default) + "\n")
        return path

    @classmethod
    def load(cls, run_dir) -> "RunRecord":
        run_dir = Path(run_dir)
        path = run_dir / RECORD_NAME
        if not path.exists():
            raise MissingArtifact(f"no {RECORD_NAME} in {run_dir}")
        d = json.loads(path.read_text())
        return cls(d["config_hash"], run_dir, d.get("started", ""), d.get("finished", ""), d.get("reports", []),
                   d.get("comparisons", []), d.get("sweep", []), d.get("manifest", {}))


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    return str(o)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _report_dict(case, backend, report: ObservableReport | None, error: Exception | None = None) -> dict:
    if report is None:
        return {"case": case, "backend": backend, "status": f"error: {type(error).__name__}: {error}",
                "reaction_time": math.nan, "performance": math.nan, "details": {}}
    return {"case": case, "backend": backend, "status": "ok", "reaction_time": report.reaction_time,
            "performance": report.performance, "params_hash": report.params_hash, "details": report.details}


def _params_hash(params: ModelParams) -> str:
    blob = json.dumps(params.to_dict(), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def half_plane_masses(values: np.ndarray, grid: Grid2) -> tuple[float, float]:
    """Mass with ``nu1 > nu2`` and with ``nu1 < nu2``; diagonal cells split evenly."""
    m = values * grid.cell_area
    x, y = grid.centers()
    tie = 0.5 * m[x == y].sum()
    return float(m[x > y].sum() + tie), float(m[x < y].sum() + tie)


class _Case:
    """All computations for one parameter set; results cached between backends."""

    def __init__(self, name: str, params: ModelParams, config: ExperimentConfig, out: Path):
        self.name, self.params, self.config, self.out = name, params, config, out
        self.grid2 = Grid2(config.grids.nx, config.grids.ny, 0.0, float(params.nu_max))
        self.equilibria = find_equilibria(params)
        self.p0 = default_initial_density(params, self.grid2, self.equilibria)
        self._manifold = None
        self._manifold_error = None
        self.profiles: dict[str, np.ndarray] = {}

    @property
    def manifold(self):
        if self._manifold is None and self._manifold_error is None:
            try:
                self._manifold = build_manifold(self.params, n=self.config.grids.n1d,
                                                y_max_factor=self.config.grids.y_max_factor,
                                                equilibria=self.equilibria)
            except DecisionFPError as exc:
                self._manifold_error = exc
        if self._manifold_error is not None:
            raise self._manifold_error
        return self._manifold

    @property
    def beta(self) -> float:
        return self.params.beta

    def reduced(self, record: RunRecord) -> ObservableReport:
        g = self.config.grids
        m = self.manifold
        path = self.out / "manifold.csv"
        m.to_csv(path)
        record.add_file(path)
        qs = steady_state(m, self.beta)
        q0 = project_onto_direction(self.p0, m.frame, m.grid)
        q1 = solve_fp1d(q0, m, self.beta, g.t_end, g.dt_1d)
        self.profiles["reduced"] = q1.values
        self.profiles["steady_state"] = qs.values
        part = partition_wells(m)
        rt, proto = reaction_time(m, self.beta, part)
        perf = performance(m, self.beta, part)
        record.comparisons.append({"case": self.name, "a": "reduced", "b": "steady_state",
                                   "l1": q1.l1_distance(qs)})
        details = {"protocol": proto.kind, "start": proto.start, "absorb": proto.absorb, "reflect": proto.reflect,
                   "epsilon": m.frame.epsilon, "wells": [float(w) for w in part.wells],
                   "barriers": [float(b) for b in part.barriers],
                   "performance_finite_time": performance_at(q1, part)}
        return ObservableReport(rt, perf, "reduced", _params_hash(self.params), details)

    def fp2d(self, record: RunRecord) -> ObservableReport:
        g = self.config.grids
        p = solve_fp2d(self.p0, self.params, self.beta, g.t_end, g.dt_2d, snapshots=g.snapshots)
        shots = []
        if g.snapshots:
            p, shots = p
        for k, s in enumerate(shots):
            for f in write_snapshot(s, self.out / f"fp2d_snapshot_{k:02d}.csv", params=self.params.to_dict()):
                record.add_file(f)
        for f in write_snapshot(p, self.out / "fp2d_final.csv", params=self.params.to_dict()):
            record.add_file(f)
        lead1, lead2 = half_plane_masses(p.values, self.grid2)
        modes = local_maxima(p.values)
        asym = float(np.abs(p.values - p.values.T).sum() / np.abs(p.values).sum())
        details = {"mass": p.mass, "min_value": float(p.values.min()), "modes": [list(m) for m in modes],
                   "mass_nu1_leads": lead1, "mass_nu2_leads": lead2, "mirror_asymmetry": asym}
        perf = lead1
        try:
            m = self.manifold
            proj = project_onto_direction(p, m.frame, m.grid)
            self.profiles["projection"] = proj.values
            perf = performance_at(proj, partition_wells(m))
            details["performance_basis"] = "projected-basin"
        except DecisionFPError as exc:
            details["performance_basis"] = "half-plane"
            details["projection_error"] = f"{type(exc).__name__}: {exc}"
        return ObservableReport(math.nan, float(min(1.0, max(0.0, perf))), "fp2d", _params_hash(self.params),
                                details)

    def sde(self, record: RunRecord) -> ObservableReport:
        s, g = self.config.sde, self.config.grids
        seed = self.config.seed
        centre = central_state(self.equilibria)
        state = EnsembleState2.from_gaussian(centre, self.params.nu_c / 20.0, s.n_paths,
                                             (0.0, float(self.params.nu_max)), seed=seed)
        n_steps = int(round(s.t_end / s.dt))
        state = run_em_2d(state, WilsonCowanField(self.params), self.beta, s.dt, n_steps)
        factor = g.nx // s.compare_nx
        coarse = Grid2(g.nx // factor, g.ny // factor, self.grid2.lo, self.grid2.hi)
        hist = histogram_density(state.particles, coarse)
        rows = [(i, j, hist.values[i, j]) for i in range(coarse.nx) for j in range(coarse.ny)]
        path = _write_csv(self.out / "sde_histogram.csv", ["i", "j", "p"], rows)
        record.add_file(path)
        if "fp2d" in self.config.backends:
            ref = solve_fp2d(self.p0, self.params, self.beta, s.t_end, s.match_dt).coarsen(factor)
            record.comparisons.append({"case": self.name, "a": "sde_histogram", "b": "fp2d",
                                       "l1": hist.l1_distance(ref)})
        lead = float(np.mean(state.particles[:, 0] > state.particles[:, 1]))
        details = {"n_paths": s.n_paths, "t_end": s.t_end, "finite_time_fraction_nu1_leads": lead}
        rt = math.nan
        try:
            m = self.manifold
            part = partition_wells(m)
            _, proto = reaction_time(m, self.beta, part)
            fpt = sample_first_passage(proto.start, beta=self.beta, dt=s.fpt_dt, horizon=s.horizon,
                                       n_paths=s.fpt_paths, g_red=TabulatedDrift.from_manifold(m),
                                       exit_at=proto.absorb, bounds=(m.grid.lo, m.grid.hi), seed=seed,
                                       workers=s.workers)
            rt = fpt.mean
            details.update({"rt_stderr": fpt.stderr, "censored": fpt.censored_count})
        except DecisionFPError as exc:
            details["reaction_time_error"] = f"{type(exc).__name__}: {exc}"
        return ObservableReport(rt, lead, "sde", _params_hash(self.params), details)

    def write_profiles(self, record: RunRecord) -> None:
        if not self.profiles or self._manifold is None:
            return
        names = [k for k in ("projection", "reduced", "steady_state") if k in self.profiles]
        y = self._manifold.y_grid
        rows = zip(y, *(self.profiles[k] for k in names))
        record.add_file(_write_csv(self.out / "profiles.csv", ["y", *names], rows))
        if "projection" in self.profiles:
            proj = self.profiles["projection"]
            h = self._manifold.grid.h
            for other in ("reduced", "steady_state"):
                if other in self.profiles:
                    l1 = float(np.sum(np.abs(proj - self.profiles[other])) * h)
                    record.comparisons.append({"case": self.name, "a": "projection", "b": other, "l1": l1})


def case_params(config: ExperimentConfig, case: str) -> ModelParams:
    return config.model if case == "unbiased" else config.model.with_bias(config.delta_lambda)


def _sweep_point(config: ExperimentConfig, index: int, w_plus: float, delta_lambda: float) -> dict:
    tw = config.three_well.replace(w_plus=w_plus)
    row = {"index": index, "w_plus": w_plus, "delta_lambda": delta_lambda}
    try:
        m = three_well_manifold(tw, delta_lambda)
        part = partition_wells(m)
        rt, proto = reaction_time(m, tw.beta, part)
        row.update(reaction_time=rt, performance=performance(m, tw.beta, part), n_wells=len(part.wells),
                   protocol=proto.kind, status="ok")
    except DecisionFPError as exc:
        row.update(reaction_time=math.nan, performance=math.nan, n_wells=0, protocol="",
                   status=f"error: {type(exc).__name__}")
    return row


def run_sweep(config: ExperimentConfig) -> list[dict]:
    """Reduced-model RT and performance over the ``(w_plus, delta_lambda)`` grid, in sweep order."""
    if config.sweep is None:
        raise MissingArtifact("config has no [sweep] table")
    points = [(w, d) for w in config.sweep.w_plus for d in config.sweep.delta_lambda]
    jobs = [(i, w, d) for i, (w, d) in enumerate(points)]
    with ThreadPoolExecutor(max_workers=config.sweep.workers) as pool:
        rows = list(pool.map(lambda job: _sweep_point(config, *job), jobs))
    return sorted(rows, key=lambda r: r["index"])


SWEEP_COLUMNS = ["index", "w_plus", "delta_lambda", "reaction_time", "performance", "n_wells", "protocol", "status"]


def run_experiment(config: ExperimentConfig, *, cases: bool = True, sweep: bool = True) -> RunRecord:
    """Run the configured backends for every case and, if present, the sweep.

    Backend failures are recorded in the report list and do not stop the
    other backends.
    """
    h = config_hash(config)
    run_dir = config.output_root() / h
    run_dir.mkdir(parents=True, exist_ok=True)
    record = RunRecord(h, run_dir, started=_now())
    (run_dir / "config.json").write_text(json.dumps(config.to_dict(), indent=2, sort_keys=True, default=str) + "\n")
    record.add_file(run_dir / "config.json")
    if cases:
        for name in config.cases:
            out = run_dir / name
            out.mkdir(exist_ok=True)
            try:
                case = _Case(name, case_params(config, name), config, out)
            except DecisionFPError as exc:
                for b in config.backends:
                    record.reports.append(_report_dict(name, b, None, exc))
                continue
            order = [b for b in ("reduced", "fp2d", "sde") if b in config.backends]
            for backend in order:
                try:
                    rep = getattr(case, backend)(record)
                    record.reports.append(_report_dict(name, backend, rep))
                except DecisionFPError as exc:
                    logger.warning("%s/%s failed: %s", name, backend, exc)
                    record.reports.append(_report_dict(name, backend, None, exc))
            case.write_profiles(record)
        rows = [(r["case"], r["backend"], r["reaction_time"], r["performance"], r["status"])
                for r in record.reports]
        record.add_file(_write_csv(run_dir / "observables.csv",
                                   ["case", "backend", "reaction_time", "performance", "status"], rows))
        if record.comparisons:
            rows = [(c["case"], c["a"], c["b"], c["l1"]) for c in record.comparisons]
            record.add_file(_write_csv(run_dir / "comparison.csv", ["case", "a", "b", "l1"], rows))
    if sweep and config.sweep is not None:
        record.sweep = run_sweep(config)
        rows = [[r[k] for k in SWEEP_COLUMNS] for r in record.sweep]
        record.add_file(_write_csv(run_dir / "sweep.csv", SWEEP_COLUMNS, rows))
    record.finished = _now()
    record.save()
    return record
