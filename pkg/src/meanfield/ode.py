"""Fixed-step RK4 integration of the mean-field equations."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import NonFinite
from .model import ModelSpec, m1bar
from .sim import TimeGrid


@dataclass(frozen=True)
class IvpProblem:
    rhs: Callable[[float, np.ndarray], np.ndarray]
    t0: float
    x0: np.ndarray
    t_end: float

    def __post_init__(self):
        object.__setattr__(self, "x0", np.atleast_1d(np.asarray(self.x0, dtype=float)))
        if not self.t_end > self.t0:
            raise ValueError("t_end must exceed t0")

    @property
    def dimension(self) -> int:
        return self.x0.size


@dataclass(frozen=True)
class OdeSolution:
    times: np.ndarray   # (points,)
    states: np.ndarray  # (points, d)

    def at(self, t):
        """Linear interpolation between stored points."""
        t = np.asarray(t, dtype=float)
        cols = [np.interp(t, self.times, self.states[:, i]) for i in range(self.states.shape[1])]
        return np.stack(cols, axis=-1)


def _rk4_step(f, t, x, h):
    k1 = f(t, x)
    k2 = f(t + 0.5 * h, x + 0.5 * h * k1)
    k3 = f(t + 0.5 * h, x + 0.5 * h * k2)
    k4 = f(t + h, x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _checked(rhs):
    def f(t, x):
        dx = np.asarray(rhs(t, x), dtype=float).reshape(x.shape)
        if not np.all(np.isfinite(dx)):
            raise NonFinite(f"right-hand side is not finite at t={t!r}")
        return dx
    return f


def integrate_ivp(problem: IvpProblem, step: float, times=None) -> OdeSolution:
    """Classical RK4 with a fixed step.

    Without ``times`` the output grid is ``t0, t0+step, ...`` with the last
    step shortened to land on ``t_end``. With ``times`` (increasing, starting
    at ``t0``) every interval is split into equal substeps no longer than
    ``step`` and only the requested points are stored.
    """
    if not step > 0:
        raise ValueError("step must be positive")
    f = _checked(problem.rhs)
    if times is None:
        span = problem.t_end - problem.t0
        m = span / step
        count = int(round(m)) if abs(m - round(m)) <= 1e-12 * max(1.0, m) else int(np.ceil(m))
        times = problem.t0 + np.minimum(np.arange(count + 1) * step, span)
        times[-1] = problem.t_end
        substeps = np.ones(count, dtype=int)
    else:
        times = np.asarray(times, dtype=float)
        if times[0] != problem.t0 or np.any(np.diff(times) <= 0):
            raise ValueError("output times must start at t0 and increase")
        gaps = np.diff(times)
        substeps = np.maximum(1, np.ceil(gaps / step - 1e-9).astype(int))
    states = np.empty((times.size, problem.dimension))
    x = problem.x0.copy()
    states[0] = x
    for i in range(times.size - 1):
        t0, t1 = times[i], times[i + 1]
        h = (t1 - t0) / substeps[i]
        for s in range(substeps[i]):
            x = _rk4_step(f, t0 + s * h, x, h)
        if not np.all(np.isfinite(x)):
            raise NonFinite(f"solution is not finite at t={t1!r}")
        states[i + 1] = x
    return OdeSolution(times, states)


def meanfield_trajectory(model: ModelSpec, x0, t_end: float, step: float,
                         grid: TimeGrid | None = None) -> OdeSolution:
    """Integrate ``x' = m1bar(x)`` from ``x0``; sampled on ``grid`` if given."""
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    model.check_domain(x0)
    problem = IvpProblem(lambda t, x: m1bar(model, x), 0.0, x0, t_end)
    if grid is not None:
        if abs(grid.t_end - t_end) > 1e-12:
            raise ValueError("grid does not end at t_end")
        return integrate_ivp(problem, step, grid.times)
    return integrate_ivp(problem, step)


def reference_moment_trajectory(meanfield: OdeSolution) -> OdeSolution:
    """Append the sum of squared coordinates to every state."""
    s = meanfield.states
    return OdeSolution(meanfield.times, np.column_stack([s, np.sum(s * s, axis=1)]))
