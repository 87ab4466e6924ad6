"""Numerical constants behind the mean-square convergence argument.

Every function here works on vectorised evaluators ``f(points) -> values``
where ``points`` has shape ``(N, k)`` and values have shape ``(N,)`` or
``(N, m)``. Grid maxima are multiplied by :data:`SAFETY_FACTOR` because a
finite grid can only underestimate a supremum.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import BoundViolated, GridMismatch, NonFinite
from .model import DomainBox, ModelSpec, drift_m1, drift_m2, m1bar, m2bar
from .sim import EnsembleStats, TimeGrid, check_same_grid

SAFETY_FACTOR = 1.05
FD_RELATIVE_STEP = 1e-4
ZERO_RATE_L = 1e-12

Evaluator = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class BoundsReport:
    b2: float
    L_m1bar: float
    L_m2bar: float
    L_gbar: float
    Mn: float
    Delta_n: float
    grid_resolution: int
    n: int

    def __post_init__(self):
        for name in ("b2", "L_m1bar", "L_m2bar", "L_gbar", "Mn", "Delta_n"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0):
                raise NonFinite(f"{name} = {v!r} is not a finite nonnegative number")

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Envelope:
    """``e(t) = (Delta + M/L) exp(L t) - M/L``, or ``Delta + M t`` when L is 0."""

    Delta: float
    M: float
    L: float

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.L < ZERO_RATE_L:
            return self.Delta + self.M * t
        return self.exponential_form(t)

    def exponential_form(self, t):
        t = np.asarray(t, dtype=float)
        # expm1 keeps small L*t accurate
        return self.Delta * np.exp(self.L * t) + (self.M / self.L) * np.expm1(self.L * t)


def _fd_step(domain: DomainBox) -> np.ndarray:
    return FD_RELATIVE_STEP * domain.width


def _columns(values, n_points):
    values = np.asarray(values, dtype=float)
    return values.reshape(n_points, -1)


def fd_hessians(f: Evaluator, points: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Central-difference Hessians of scalar ``f`` at ``points``, shape ``(N, k, k)``."""
    points = np.asarray(points, dtype=float)
    n_pts, k = points.shape
    eye = np.diag(h)
    f0 = np.asarray(f(points), dtype=float).reshape(n_pts)
    hess = np.empty((n_pts, k, k))
    for i in range(k):
        fp = np.asarray(f(points + eye[i]), dtype=float).reshape(n_pts)
        fm = np.asarray(f(points - eye[i]), dtype=float).reshape(n_pts)
        hess[:, i, i] = (fp - 2.0 * f0 + fm) / (h[i] * h[i])
        for j in range(i + 1, k):
            fpp = f(points + eye[i] + eye[j])
            fpm = f(points + eye[i] - eye[j])
            fmp = f(points - eye[i] + eye[j])
            fmm = f(points - eye[i] - eye[j])
            mixed = (np.asarray(fpp) - fpm - fmp + fmm).reshape(n_pts) / (4.0 * h[i] * h[j])
            hess[:, i, j] = mixed
            hess[:, j, i] = mixed
    if not np.all(np.isfinite(hess)):
        raise NonFinite("finite-difference Hessian is not finite")
    return hess


def fd_jacobians(f: Evaluator, points: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Central-difference Jacobians, shape ``(N, m, k)``."""
    points = np.asarray(points, dtype=float)
    n_pts, k = points.shape
    eye = np.diag(h)
    cols = []
    for i in range(k):
        fp = _columns(f(points + eye[i]), n_pts)
        fm = _columns(f(points - eye[i]), n_pts)
        with np.errstate(invalid="ignore"):
            cols.append((fp - fm) / (2.0 * h[i]))
    jac = np.stack(cols, axis=-1)
    if not np.all(np.isfinite(jac)):
        raise NonFinite("finite-difference Jacobian is not finite")
    return jac


def spectral_radius(matrices: np.ndarray) -> np.ndarray:
    """Largest absolute eigenvalue of each symmetric matrix in a stack."""
    return np.max(np.abs(np.linalg.eigvalsh(matrices)), axis=-1)


def _check_resolution(resolution):
    if int(resolution) != resolution or resolution < 2:
        raise ValueError("resolution must be an integer >= 2")


def hessian_bound(f: Evaluator, domain: DomainBox, resolution: int,
                  safety: float = SAFETY_FACTOR) -> float:
    """Grid maximum of the Hessian spectral radius of scalar ``f`` over the box.

    The grid is inset by the difference step so every stencil stays inside.
    """
    _check_resolution(resolution)
    h = _fd_step(domain)
    points = domain.grid(int(resolution), inset=h)
    return float(np.max(spectral_radius(fd_hessians(f, points, h)))) * safety


def lipschitz_estimate(f: Evaluator, domain: DomainBox, resolution: int,
                       safety: float = SAFETY_FACTOR) -> float:
    """Grid maximum of the Jacobian operator 2-norm of ``f``."""
    _check_resolution(resolution)
    h = _fd_step(domain)
    points = domain.grid(int(resolution), inset=h)
    jac = fd_jacobians(f, points, h)
    norms = np.linalg.svd(jac, compute_uv=False)[:, 0]
    return float(np.max(norms)) * safety


def drift_gap(model: ModelSpec, n: int, resolution: int) -> float:
    """Grid maximum of ``|(m1n, m2n) - (m1bar, m2bar)|_2`` over the whole box."""
    _check_resolution(resolution)
    x = model.domain.grid(int(resolution))
    d1 = drift_m1(model, n, x) - m1bar(model, x)
    d2 = drift_m2(model, n, x) - m2bar(model, x)
    gap = np.sqrt(np.sum(d1 * d1, axis=-1) + d2 * d2)
    return float(np.max(gap))


def moment_vector(x) -> np.ndarray:
    """``(x, sum_j x_j^2)`` for a single state."""
    x = np.asarray(x, dtype=float).reshape(-1)
    return np.append(x, np.dot(x, x))


def initial_gap(x0_n, x0) -> float:
    return float(np.linalg.norm(moment_vector(x0_n) - moment_vector(x0)))


def gbar_lipschitz_bound(L_m1bar: float, L_m2bar: float, b2: float, domain: DomainBox, k: int) -> float:
    """Explicit Lipschitz bound for the closed moment system.

    ``R`` is the largest coordinate magnitude on the box, so the variance
    functional ``z2 - |z1|^2`` is ``sqrt(1 + 4 k R^2)``-Lipschitz. It enters
    all ``k + 1`` equations with coefficients bounded by ``b2 / 2``, a vector
    of norm at most ``b2 * max(1, sqrt(k + 1) / 2)``.
    """
    for v in (L_m1bar, L_m2bar, b2):
        if v < 0:
            raise ValueError("constants must be nonnegative")
    radius = float(np.max(np.maximum(np.abs(domain.lower), np.abs(domain.upper))))
    lip_var = np.sqrt(1.0 + 4.0 * k * radius ** 2)
    coef = max(1.0, np.sqrt(k + 1.0) / 2.0)
    return float(np.sqrt(k) * L_m1bar + L_m2bar + coef * b2 * lip_var)


def gronwall_envelope(Delta: float, M: float, L: float, grid) -> np.ndarray:
    """Envelope values at each time of ``grid`` (a TimeGrid or an array of times)."""
    if Delta < 0 or M < 0 or L < 0:
        raise ValueError("Delta, M and L must be nonnegative")
    times = grid.times if isinstance(grid, TimeGrid) else np.asarray(grid, dtype=float)
    return Envelope(Delta, M, L)(times)


def taylor_remainder_check(f: Evaluator, samples, b: float, tol: float = 1e-12):
    """Compare ``mean f(Y)`` with ``f(mean Y)`` on an empirical distribution.

    Returns ``(gap, bound, h)`` where ``bound = b/2 * sum_i Var[Y_i]``
    (population variances) and ``h`` is the signed gap per unit variance.
    Raises BoundViolated if the gap exceeds the bound.
    """
    y = np.asarray(samples, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    if y.shape[0] == 0:
        raise ValueError("need at least one sample")
    if b < 0:
        raise ValueError("b must be nonnegative")
    mean = y.mean(axis=0)
    fy = np.asarray(f(y), dtype=float).reshape(y.shape[0])
    fmean = float(np.asarray(f(mean[None, :]), dtype=float).reshape(-1)[0])
    signed = float(fy.mean()) - fmean
    varsum = float(np.sum(np.mean((y - mean) ** 2, axis=0)))
    bound = 0.5 * b * varsum
    h = signed / varsum if varsum > 0 else 0.0
    gap = abs(signed)
    if gap > bound + tol:
        raise BoundViolated(f"|E f(Y) - f(E Y)| = {gap!r} exceeds (b/2) sum Var = {bound!r}")
    return gap, bound, h


def drift_components(model: ModelSpec, n: int) -> list[Evaluator]:
    """Scalar evaluators ``m1n_1, ..., m1n_k, m2n`` for a fixed ``n``."""
    comps = [lambda x, i=i: drift_m1(model, n, x)[..., i] for i in range(model.k)]
    comps.append(lambda x: drift_m2(model, n, x))
    return comps


def hessian_constant(model: ModelSpec, n: int, resolution: int) -> float:
    """``b2``: a common Hessian bound for every first-moment drift component and m2n."""
    return max(hessian_bound(f, model.domain, resolution) for f in drift_components(model, n))


def lattice_point(model: ModelSpec, n: int, x0) -> np.ndarray:
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    lower = model.domain.lower
    return lower + np.rint((x0 - lower) * n) / n


def theorem_envelope(model: ModelSpec, n: int, x0, grid: TimeGrid, resolution: int):
    """Bound on ``|z_n(t) - zbar(t)|_2`` on ``grid`` plus the constants used.

    ``z_n = (E X_n, sum_j E X_{n,j}^2)`` starts from the lattice point nearest
    to ``x0``; ``zbar`` is the mean-field state with its squared norm.
    """
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    model.check_domain(x0)
    b2 = hessian_constant(model, n, resolution)
    L1 = lipschitz_estimate(lambda x: m1bar(model, x), model.domain, resolution)
    L2 = lipschitz_estimate(lambda x: m2bar(model, x), model.domain, resolution)
    Lg = gbar_lipschitz_bound(L1, L2, b2, model.domain, model.k)
    Mn = drift_gap(model, n, resolution)
    Dn = initial_gap(lattice_point(model, n, x0), x0)
    report = BoundsReport(b2=b2, L_m1bar=L1, L_m2bar=L2, L_gbar=Lg, Mn=Mn, Delta_n=Dn,
                          grid_resolution=int(resolution), n=int(n))
    bound = gronwall_envelope(Dn, Mn, Lg, grid)
    if not np.all(np.isfinite(bound)):
        raise NonFinite("envelope overflowed; shorten the horizon")
    return bound, report


def moment_gap(stats: EnsembleStats, reference) -> tuple[np.ndarray, np.ndarray]:
    """Empirical ``|zhat_n(t) - zbar(t)|_2`` and its combined standard error.

    ``reference`` is either the mean-field solution or its moment extension.
    """
    check_same_grid(stats.grid.times, reference.times)
    ref = np.asarray(reference.states)[:, : stats.k]
    ref_z = np.column_stack([ref, np.sum(ref * ref, axis=1)])
    emp_z = np.column_stack([stats.mean, stats.sumsq])
    gap = np.linalg.norm(emp_z - ref_z, axis=1)
    se = np.sqrt(np.sum(stats.se_mean ** 2, axis=1) + stats.se_sumsq ** 2)
    return gap, se


def variance_collapse_check(stats: EnsembleStats) -> np.ndarray:
    """Residual ``d/dt E[sum Y^2] - sum_i 2 (d/dt E[Y_i]) E[Y_i]`` at interior times.

    Centered differences on the ensemble grid; this is the discrete
    derivative of the variance sum and should shrink as the process
    becomes deterministic.
    """
    if stats.replicas < 2:
        raise ValueError("variance collapse check needs at least 2 replicas")
    times = stats.grid.times
    if times.size < 3:
        raise ValueError("variance collapse check needs at least 3 grid points")
    if stats.mean.shape[0] != times.size:
        raise GridMismatch("statistics do not match their grid")
    dt2 = times[2:] - times[:-2]
    d_sumsq = (stats.sumsq[2:] - stats.sumsq[:-2]) / dt2
    d_mean = (stats.mean[2:] - stats.mean[:-2]) / dt2[:, None]
    return d_sumsq - np.sum(2.0 * d_mean * stats.mean[1:-1], axis=1)


def variance_collapse_se(samples: np.ndarray, times: Sequence[float]) -> np.ndarray:
    """Delta-method standard error of :func:`variance_collapse_check`."""
    y = np.asarray(samples, dtype=float)
    r = y.shape[0]
    times = np.asarray(times, dtype=float)
    dt2 = (times[2:] - times[:-2])
    mean = y.mean(axis=0)
    sq = np.sum(y * y, axis=-1)
    infl = (sq[:, 2:] - sq[:, :-2]) / dt2
    d_mean = (mean[2:] - mean[:-2]) / dt2[:, None]
    d_y = (y[:, 2:] - y[:, :-2]) / dt2[None, :, None]
    infl = infl - 2.0 * np.sum(d_y * mean[1:-1] + d_mean * y[:, 1:-1], axis=-1)
    return infl.std(axis=0, ddof=1) / np.sqrt(r)


__all__ = [
    "SAFETY_FACTOR", "BoundsReport", "Envelope", "hessian_bound", "lipschitz_estimate",
    "drift_gap", "initial_gap", "gbar_lipschitz_bound", "gronwall_envelope",
    "taylor_remainder_check", "theorem_envelope", "variance_collapse_check",
    "variance_collapse_se", "moment_gap", "drift_components", "hessian_constant",
]
