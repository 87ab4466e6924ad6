"""Convergence studies: ensembles, mean-field reference and bounds for a list of n."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from . import report as fmt
from .bounds import (
    BoundsReport,
    drift_components,
    moment_gap,
    taylor_remainder_check,
    theorem_envelope,
)
from .errors import BoundViolated, ConfigError
from .model import ModelSpec, builtin, load_model
from .ode import OdeSolution, meanfield_trajectory
from .sim import EnsembleStats, TimeGrid, mse_vs_reference, simulate_ensemble

log = logging.getLogger(__name__)

STAT_TOLERANCE = 3.0


def default_resolution(k: int) -> int:
    """Bounds grid points per axis, keeping the grid size moderate."""
    return {1: 401, 2: 101, 3: 21}.get(k, 11)


@dataclass(frozen=True)
class RunConfig:
    n_list: tuple[int, ...]
    x0: tuple[float, ...]
    builtin_name: str | None = None
    params: Mapping[str, float] = field(default_factory=dict)
    model_path: str | None = None
    replicas: int = 2000
    t_end: float = 5.0
    grid_points: int = 51
    ode_step: float = 1e-3
    bounds_resolution: int | None = None
    seed: int | None = None
    out_dir: str = "."
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "n_list", tuple(self.n_list))
        object.__setattr__(self, "x0", tuple(float(v) for v in self.x0))
        if not self.n_list:
            raise ConfigError("n list is empty")
        if any(int(n) != n or n < 1 for n in self.n_list):
            raise ConfigError("every n must be a positive integer")
        if any(b <= a for a, b in zip(self.n_list, self.n_list[1:])):
            raise ConfigError("n list must be strictly increasing")
        if self.replicas < 1:
            raise ConfigError("replicas must be at least 1")
        if (self.builtin_name is None) == (self.model_path is None):
            raise ConfigError("give exactly one of a builtin model or a model file")
        if not self.t_end > 0:
            raise ConfigError("t_end must be positive")
        if self.grid_points < 2:
            raise ConfigError("grid needs at least 2 points")
        if not self.ode_step > 0:
            raise ConfigError("ODE step must be positive")
        if self.bounds_resolution is not None and self.bounds_resolution < 2:
            raise ConfigError("bounds grid needs at least 2 points per axis")
        if self.workers < 1:
            raise ConfigError("thread count must be at least 1")
        if self.seed is not None and not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")

    @property
    def grid(self) -> TimeGrid:
        return TimeGrid(self.t_end, self.grid_points)

    def load(self) -> ModelSpec:
        if self.builtin_name is not None:
            return builtin(self.builtin_name, self.params)
        text = Path(self.model_path).read_text(encoding="utf-8")
        return load_model(text)

    def model_label(self) -> str:
        return self.builtin_name if self.builtin_name is not None else str(self.model_path)


@dataclass
class StudyRow:
    n: int
    replicas: int
    sup_mse: float
    envelope_margin: float
    seed: int


@dataclass
class PerN:
    samples: np.ndarray
    stats: EnsembleStats
    meanfield: OdeSolution
    mse: np.ndarray
    moment_bound: np.ndarray
    moment_gap: np.ndarray
    moment_se: np.ndarray
    bounds: BoundsReport


@dataclass
class ConvergenceReport:
    model: str
    params: dict
    rows: list[StudyRow]
    slope: float | None
    details: dict[int, PerN] = field(default_factory=dict)

    @property
    def breached(self) -> bool:
        return any(r.envelope_margin < 0 for r in self.rows)

    def summary(self) -> dict:
        bounds = [self.details[r.n].bounds for r in self.rows]
        return {
            "model": self.model,
            "params": dict(self.params),
            "rows": [
                {"n": r.n, "replicas": r.replicas, "sup_mse": r.sup_mse,
                 "envelope_margin": r.envelope_margin, "seed": r.seed}
                for r in self.rows
            ],
            "slope": self.slope,
            "bounds": {
                "b2": max(b.b2 for b in bounds),
                "L_m1bar": max(b.L_m1bar for b in bounds),
                "L_gbar": max(b.L_gbar for b in bounds),
                "Mn_per_n": {str(b.n): b.Mn for b in bounds},
                "Delta_n": max(b.Delta_n for b in bounds),
            },
        }


def loglog_slope(ns, values) -> float:
    """Least-squares slope of log(values) against log(ns)."""
    slope, _ = np.polyfit(np.log(np.asarray(ns, dtype=float)), np.log(np.asarray(values, dtype=float)), 1)
    return float(slope)


def lemma2_check(model: ModelSpec, n: int, samples: np.ndarray, b2: float) -> None:
    """Run the Taylor remainder inequality for every drift component at every grid time."""
    comps = drift_components(model, n)
    for g in range(samples.shape[1]):
        for f in comps:
            taylor_remainder_check(f, samples[:, g, :], b2)


def study_one(model: ModelSpec, n: int, config: RunConfig) -> PerN:
    grid = config.grid
    resolution = config.bounds_resolution or default_resolution(model.k)
    samples = simulate_ensemble(model, n, config.x0, grid, config.replicas, config.seed,
                                workers=config.workers)
    stats = EnsembleStats.from_samples(samples, grid)
    mf = meanfield_trajectory(model, config.x0, config.t_end, config.ode_step, grid)
    mse = mse_vs_reference(stats, mf)
    bound, rep = theorem_envelope(model, n, config.x0, grid, resolution)
    gap, se = moment_gap(stats, mf)
    lemma2_check(model, n, samples, rep.b2)
    return PerN(samples, stats, mf, mse, bound, gap, se, rep)


def run_convergence_study(config: RunConfig) -> ConvergenceReport:
    if config.seed is None:
        raise ConfigError("a seed is required for a convergence study")
    model = config.load()
    rows, details = [], {}
    for n in config.n_list:
        log.info("n=%d: %d replicas", n, config.replicas)
        res = study_one(model, n, config)
        margin = float(np.min(res.moment_bound + STAT_TOLERANCE * res.moment_se - res.moment_gap))
        rows.append(StudyRow(int(n), config.replicas, float(np.max(res.mse)), margin, int(config.seed)))
        details[int(n)] = res
    slope = loglog_slope([r.n for r in rows], [r.sup_mse for r in rows]) if len(rows) >= 3 else None
    return ConvergenceReport(config.model_label(), dict(model.params), rows, slope, details)


def check_csv(res: PerN) -> str:
    header = ["t", "mse", "moment_gap", "moment_se", "moment_bound"]
    rows = zip(res.stats.grid.times, res.mse, res.moment_gap, res.moment_se, res.moment_bound)
    return fmt.csv_text(header, rows)


def emit_report(report: ConvergenceReport, format: str, path) -> list[Path]:
    """Write per-n files and the summary into directory ``path``."""
    if format not in ("csv", "json"):
        raise ConfigError(f"unknown format {format!r}")
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for row in report.rows:
        res = report.details[row.n]
        if format == "csv":
            files = {f"trajectory_n{row.n}.csv": fmt.trajectory_csv(res.stats),
                     f"check_n{row.n}.csv": check_csv(res)}
        else:
            files = {f"trajectory_n{row.n}.json": fmt.trajectory_json(res.stats),
                     f"check_n{row.n}.json": fmt.json_text({
                         "t": res.stats.grid.times, "mse": res.mse, "moment_gap": res.moment_gap,
                         "moment_se": res.moment_se, "moment_bound": res.moment_bound,
                         "bounds": res.bounds.as_dict()})}
        for name, text in files.items():
            fmt.write_text(out / name, text)
            written.append(out / name)
    if format == "csv":
        table = fmt.csv_text(["n", "replicas", "sup_mse", "envelope_margin", "seed"],
                             ([r.n, r.replicas, r.sup_mse, r.envelope_margin, r.seed] for r in report.rows))
        fmt.write_text(out / "convergence.csv", table)
        written.append(out / "convergence.csv")
    fmt.write_text(out / "summary.json", fmt.json_text(report.summary()))
    written.append(out / "summary.json")
    return written


def ensure_bound_holds(report: ConvergenceReport) -> None:
    for r in report.rows:
        if r.envelope_margin < 0:
            raise BoundViolated(f"n={r.n}: empirical moment gap exceeds the envelope by {-r.envelope_margin!r}")
