"""Acceptance gate: one test per criterion, each recording a PASS/FAIL line.

The lines are printed in the pytest terminal summary under
"acceptance criteria".
"""

import os

import numpy as np

from conftest import record
from meanfield.bounds import SAFETY_FACTOR, hessian_bound, lipschitz_estimate
from meanfield.cli import main
from meanfield.ode import IvpProblem, integrate_ivp, meanfield_trajectory
from meanfield.model import builtin, drift_m1, drift_m2, jump_second_moment, m1bar, m2bar
from meanfield.sim import EnsembleStats, TimeGrid, simulate_ensemble

SIS_PARAMS = {"beta": 2.0, "gamma": 1.0}


def logistic(t, x0, beta, gamma):
    r = beta - gamma
    cap = r / beta
    return cap * x0 * np.exp(r * t) / (cap + x0 * (np.exp(r * t) - 1))


def test_criterion_01_meanfield_oracle():
    sis = builtin("sis", SIS_PARAMS)
    sol = meanfield_trajectory(sis, [0.1], 1.0, 1e-3)
    err = abs(sol.states[-1, 0] - logistic(1.0, 0.1, 2.0, 1.0))
    ok = err <= 1e-6
    record(1, "mean-field vs logistic closed form", ok, f"err={err:.3e} <= 1e-6")
    assert ok


def test_criterion_02_ssa_mean_oracle():
    model = builtin("pure_death", {"gamma": 1.0})
    grid = TimeGrid(2.0, 5)  # 0, 0.5, 1, 1.5, 2
    samples = simulate_ensemble(model, 100, [1.0], grid, 10000, seed=2024)
    stats = EnsembleStats.from_samples(samples, grid)
    idx = [1, 2, 4]
    z = np.abs(stats.mean[idx, 0] - np.exp(-grid.times[idx])) / stats.se_mean[idx, 0]
    ok = bool(np.all(z <= 3.0))
    record(2, "pure death ensemble mean vs exp(-t)", ok, "z=" + ", ".join(f"{v:.2f}" for v in z))
    assert ok


def test_criterion_03_mean_square_convergence(sis_study):
    sup = [r.sup_mse for r in sis_study.rows]
    decreasing = all(b < a for a, b in zip(sup, sup[1:]))
    slope = sis_study.slope
    ok = decreasing and -1.3 <= slope <= -0.7
    record(3, "sup mse decreasing, log-log slope", ok,
           "sup_mse=" + ", ".join(f"{v:.3e}" for v in sup) + f"; slope={slope:.3f}")
    assert ok


def test_criterion_04_envelope_containment(sis_study):
    res = sis_study.details[400]
    slack = res.moment_bound + 3.0 * res.moment_se - res.moment_gap
    ok = bool(np.all(slack >= 0))
    record(4, "moment gap inside envelope at n=400", ok, f"min slack={np.min(slack):.3e}")
    assert ok


def _h_m1(f, y):
    mean = y.mean(axis=0)
    var = np.sum(np.mean((y - mean) ** 2, axis=0))
    return (np.mean(f(y)) - f(mean[None, :])[0]) / var


def test_criterion_05_taylor_remainder(sis_study):
    model = builtin("sis", SIS_PARAMS)
    worst, h_worst = np.inf, 0.0
    for n, res in sis_study.details.items():
        b2 = res.bounds.b2
        m2 = lambda x: drift_m2(model, n, x)
        m1 = lambda x: drift_m1(model, n, x)[..., 0]
        for g in range(1, res.samples.shape[1]):
            y = res.samples[:, g, :]
            r = y.shape[0]
            mean = y.mean(axis=0)
            values = m2(y)
            gap = abs(values.mean() - m2(mean[None, :])[0])
            varsum = np.sum(np.mean((y - mean) ** 2, axis=0))
            se = values.std(ddof=1) / np.sqrt(r)
            worst = min(worst, 0.5 * b2 * varsum + 3.0 * se - gap)
            if varsum == 0:
                continue
            h = _h_m1(m1, y)
            batches = [_h_m1(m1, part) for part in np.array_split(y, 20)]
            h_se = np.std(batches, ddof=1) / np.sqrt(len(batches))
            h_worst = max(h_worst, abs(h + 2.0) - 3.0 * h_se)
    ok = worst >= 0 and h_worst <= 1e-12
    record(5, "Taylor remainder for m2n; h for m1n equals -beta", ok,
           f"min slack={worst:.3e}; max |h+2|-3SE={h_worst:.3e}")
    assert ok


def test_criterion_06_drift_gap():
    from meanfield.bounds import drift_gap

    sis = builtin("sis", SIS_PARAMS)
    scaled = [n * drift_gap(sis, n, 401) for n in (10, 100, 1000)]
    ok = all(abs(v - 1.125) <= 1e-3 for v in scaled)
    record(6, "n * Mn = 1.125", ok, ", ".join(f"{v:.6f}" for v in scaled))
    assert ok


def test_criterion_07_moment_identities():
    cases = [(builtin("sis", SIS_PARAMS), 10000),
             (builtin("bipartite_si", {"bm": 1.5, "bf": 1.5}), 10)]
    exact, jump_err = 0.0, 0.0
    for model, per_axis in cases:
        x = model.domain.grid(per_axis)
        assert x.shape[0] == 10 ** 4
        exact = max(exact, float(np.max(np.abs(m2bar(model, x) - np.sum(2 * m1bar(model, x) * x, axis=-1)))))
        for n in (10, 100, 1000):
            lhs = n * (drift_m2(model, n, x) - m2bar(model, x))
            jump_err = max(jump_err, float(np.max(np.abs(lhs - jump_second_moment(model, x)))))
    ok = exact == 0.0 and jump_err <= 1e-10
    record(7, "m2bar identity and jump identity", ok, f"identity={exact:.1e}; jump err={jump_err:.3e}")
    assert ok


def test_criterion_08_bipartite_symmetry():
    model = builtin("bipartite_si", {"bm": 1.5, "bf": 1.5})
    x0 = [0.9, 0.1, 0.9, 0.1]
    grid = TimeGrid(5.0, 51)
    sol = meanfield_trajectory(model, x0, 5.0, 1e-3, grid)
    mf_err = float(np.max(np.abs(sol.states[:, :2] - sol.states[:, 2:])))
    stats = EnsembleStats.from_samples(simulate_ensemble(model, 200, x0, grid, 2000, seed=7), grid)
    diff = np.abs(stats.mean[:, :2] - stats.mean[:, 2:])
    se = np.sqrt(stats.se_mean[:, :2] ** 2 + stats.se_mean[:, 2:] ** 2)
    ens_ok = bool(np.all(diff <= 3.0 * se))
    z = float(np.max(np.where(se > 0, diff / np.where(se > 0, se, 1.0), 0.0)))
    ok = mf_err <= 1e-12 and ens_ok
    record(8, "bipartite male/female symmetry", ok, f"mean-field err={mf_err:.1e}; max z={z:.2f}")
    assert ok


def _decay_error(step):
    sol = integrate_ivp(IvpProblem(lambda t, x: -x, 0.0, [1.0], 1.0), step)
    return np.max(np.abs(sol.states[:, 0] - np.exp(-sol.times)))


def test_criterion_09_numerics():
    ratio = _decay_error(1e-2) / _decay_error(5e-3)
    sis = builtin("sis", SIS_PARAMS)
    # hand derivative of m2n for n=10: 4b - 4g - 2b/n - 12 b x, sup |.| = 20.4 at x = 1
    hess = hessian_bound(lambda x: drift_m2(sis, 10, x), sis.domain, 401) / SAFETY_FACTOR
    lip = lipschitz_estimate(lambda x: m1bar(sis, x), sis.domain, 401)
    ok = (12 <= ratio <= 20 and abs(hess / 20.4 - 1) <= 0.02
          and abs(lip / (3.0 * SAFETY_FACTOR) - 1) <= 0.02)
    record(9, "RK4 order, hessian bound, lipschitz estimate", ok,
           f"ratio={ratio:.2f}; hessian={hess:.4f}; lipschitz={lip:.4f}")
    assert ok


def test_criterion_10_thread_determinism(tmp_path):
    args = ["converge", "--builtin", "sis", "--param", "beta=2", "gamma=1", "--n", "100,200,400",
            "--x0", "0.2", "--replicas", "400", "--t-end", "5", "--grid", "51", "--seed", "42"]
    codes = []
    for fmt in ("csv", "json"):
        for threads in (1, 4):
            codes.append(main([*args, "--format", fmt, "--threads", str(threads),
                               "--out", str(tmp_path / f"{fmt}{threads}")]))
    same = True
    for fmt in ("csv", "json"):
        names = sorted(os.listdir(tmp_path / f"{fmt}1"))
        same &= names == sorted(os.listdir(tmp_path / f"{fmt}4"))
        for name in names:
            same &= (tmp_path / f"{fmt}1" / name).read_bytes() == (tmp_path / f"{fmt}4" / name).read_bytes()
    ok = codes == [0, 0, 0, 0] and same
    record(10, "converge byte-identical across thread counts", ok, f"exit codes={codes}")
    assert ok
