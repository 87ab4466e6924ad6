"""Exact stochastic simulation of the scaled jump process.

Replicas are simulated side by side with numpy: each one keeps its own
clock, integer particle counts and event counter. Randomness comes from
:mod:`meanfield.rng`, indexed by (replica, event), so the path of a replica
does not depend on which other replicas share its batch.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import rng
from .errors import Escape, GridMismatch, OffLattice
from .model import DOMAIN_TOLERANCE, ModelSpec

LATTICE_TOLERANCE = 1e-9


@dataclass(frozen=True)
class TimeGrid:
    t_end: float
    points: int

    def __post_init__(self):
        if not (self.t_end > 0 and np.isfinite(self.t_end)):
            raise ValueError("t_end must be positive and finite")
        if int(self.points) != self.points or self.points < 2:
            raise ValueError("a time grid needs at least 2 points")

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_end, int(self.points))

    @property
    def spacing(self) -> float:
        return self.t_end / (self.points - 1)


@dataclass(frozen=True)
class PathSample:
    grid: TimeGrid
    states: np.ndarray  # (points, k)


@dataclass(frozen=True)
class EnsembleStats:
    grid: TimeGrid
    mean: np.ndarray      # (points, k)
    sumsq: np.ndarray     # (points,)
    varsum: np.ndarray    # (points,)
    se_mean: np.ndarray   # (points, k)
    se_sumsq: np.ndarray  # (points,)
    replicas: int

    @classmethod
    def from_samples(cls, samples: np.ndarray, grid: TimeGrid) -> "EnsembleStats":
        """Moments of an ``(replicas, points, k)`` sample array.

        Reductions run over the replica axis in ascending order, on
        deviations from replica 0 so that a deterministic column is exact.
        """
        samples = np.ascontiguousarray(samples, dtype=float)
        r = samples.shape[0]
        mean = samples[0] + np.add.reduce(samples - samples[0], axis=0) / r
        sq = np.add.reduce(samples * samples, axis=-1)
        sumsq = sq[0] + np.add.reduce(sq - sq[0], axis=0) / r
        if r > 1:
            var = np.add.reduce((samples - mean) ** 2, axis=0) / (r - 1)
            sq_var = np.add.reduce((sq - sumsq) ** 2, axis=0) / (r - 1)
        else:
            var = np.zeros_like(mean)
            sq_var = np.zeros_like(sumsq)
        return cls(
            grid=grid,
            mean=mean,
            sumsq=sumsq,
            varsum=np.maximum(var.sum(axis=-1), 0.0),
            se_mean=np.sqrt(var / r),
            se_sumsq=np.sqrt(sq_var / r),
            replicas=r,
        )

    @property
    def k(self) -> int:
        return self.mean.shape[1]


def lattice_counts(model: ModelSpec, n: int, x0) -> np.ndarray:
    """Integer offsets ``m`` with ``x0 = lower + m / n``; raises OffLattice."""
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.size != model.k:
        raise OffLattice(f"initial state has dimension {x0.size}, expected {model.k}")
    if not model.domain.contains(x0):
        raise OffLattice("initial state outside the domain")
    scaled = (x0 - model.domain.lower) * n
    counts = np.rint(scaled)
    if np.any(np.abs(scaled - counts) > LATTICE_TOLERANCE * max(1.0, n)):
        raise OffLattice(f"initial state {x0.tolist()} is not on the 1/{n} lattice")
    return counts.astype(np.int64)


def _simulate_batch(model, n, counts0, times, keys):
    """SSA for one batch of replicas; returns states of shape (R, G, k)."""
    r_count = keys.size
    g_count = times.size
    k = model.k
    lower = model.domain.lower
    upper = model.domain.upper
    deltas = model.deltas.astype(np.int64)
    out = np.empty((r_count, g_count, k))

    ids = np.arange(r_count)
    counts = np.tile(counts0, (r_count, 1))
    t = np.zeros(r_count)
    events = np.zeros(r_count, dtype=np.uint64)
    next_g = np.zeros(r_count, dtype=np.int64)
    keys = keys.copy()

    while ids.size:
        x = lower + counts / n
        q = model.rates(x) * n
        cum = np.cumsum(q, axis=1)
        total = cum[:, -1]
        u1 = rng.uniforms(keys, events * np.uint64(2))
        u2 = rng.uniforms(keys, events * np.uint64(2) + np.uint64(1))
        with np.errstate(divide="ignore"):
            t_next = np.where(total > 0, t - np.log1p(-u1) / total, np.inf)

        # record the current state at grid times strictly before the next event
        while True:
            pending = next_g < g_count
            hit = pending & (times[np.minimum(next_g, g_count - 1)] < t_next)
            if not hit.any():
                break
            rows = np.nonzero(hit)[0]
            out[ids[rows], next_g[rows]] = x[rows]
            next_g[rows] += 1

        alive = next_g < g_count
        if not alive.all():
            ids, counts, t, t_next = ids[alive], counts[alive], t[alive], t_next[alive]
            events, next_g, keys = events[alive], next_g[alive], keys[alive]
            cum, total, u2 = cum[alive], total[alive], u2[alive]
            if not ids.size:
                break

        target = u2 * total
        choice = np.sum(cum <= target[:, None], axis=1)
        counts = counts + deltas[choice]
        x_new = lower + counts / n
        if np.any(x_new < lower - DOMAIN_TOLERANCE) or np.any(x_new > upper + DOMAIN_TOLERANCE):
            raise Escape("a jump left the domain; rates must vanish where a jump would exit")
        t = t_next
        events = events + np.uint64(1)
    return out


def simulate_replicas(model: ModelSpec, n: int, x0, grid: TimeGrid, replica_ids, seed: int) -> np.ndarray:
    counts0 = lattice_counts(model, n, x0)
    keys = rng.replica_keys(seed, replica_ids)
    return _simulate_batch(model, int(n), counts0, grid.times, keys)


def simulate_path(model: ModelSpec, n: int, x0, grid: TimeGrid, seed: int, replica: int = 0) -> PathSample:
    """One exact sample path observed on ``grid`` (right-continuous values).

    ``replica`` selects the substream; replica ``r`` of :func:`run_ensemble`
    with the same seed is exactly this path.
    """
    states = simulate_replicas(model, n, x0, grid, [replica], seed)[0]
    return PathSample(grid, states)


def simulate_ensemble(model: ModelSpec, n: int, x0, grid: TimeGrid, replicas: int, seed: int,
                      workers: int = 1, batch_size: int | None = None) -> np.ndarray:
    """Grid states of ``replicas`` independent paths, shape ``(replicas, points, k)``.

    The result is identical for any ``workers`` and ``batch_size``.
    """
    if replicas < 1:
        raise ValueError("replicas must be at least 1")
    if workers < 1:
        raise ValueError("workers must be at least 1")
    lattice_counts(model, n, x0)
    if batch_size is None:
        batch_size = -(-replicas // workers)
    starts = range(0, replicas, batch_size)
    chunks = [np.arange(s, min(s + batch_size, replicas)) for s in starts]
    if workers == 1:
        parts = [simulate_replicas(model, n, x0, grid, c, seed) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda c: simulate_replicas(model, n, x0, grid, c, seed), chunks))
    return np.concatenate(parts, axis=0)


def run_ensemble(model: ModelSpec, n: int, x0, grid: TimeGrid, replicas: int, seed: int,
                 workers: int = 1) -> EnsembleStats:
    samples = simulate_ensemble(model, n, x0, grid, replicas, seed, workers=workers)
    return EnsembleStats.from_samples(samples, grid)


def check_same_grid(times_a, times_b):
    a = np.asarray(times_a, dtype=float)
    b = np.asarray(times_b, dtype=float)
    if a.shape != b.shape or not np.allclose(a, b, rtol=0.0, atol=1e-12):
        raise GridMismatch("time grids differ")


def mse_vs_reference(stats: EnsembleStats, reference) -> np.ndarray:
    """Mean-square distance ``E|X(t) - xbar(t)|^2`` = variance sum + squared bias."""
    check_same_grid(stats.grid.times, reference.times)
    ref = np.asarray(reference.states)[:, : stats.k]
    bias = stats.mean - ref
    return stats.varsum + np.sum(bias * bias, axis=-1)


__all__ = [
    "TimeGrid", "PathSample", "EnsembleStats", "lattice_counts", "simulate_path",
    "simulate_replicas", "simulate_ensemble", "run_ensemble", "mse_vs_reference",
]
