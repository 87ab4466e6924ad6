import math

import numpy as np
import pytest

from meanfield.errors import NonFinite
from meanfield.model import builtin, m2bar
from meanfield.ode import IvpProblem, OdeSolution, integrate_ivp, meanfield_trajectory, reference_moment_trajectory
from meanfield.sim import TimeGrid


def logistic(t, x0, beta, gamma):
    r = beta - gamma
    cap = r / beta
    return cap * x0 * np.exp(r * t) / (cap + x0 * (np.exp(r * t) - 1))


def decay_error(step):
    sol = integrate_ivp(IvpProblem(lambda t, x: -x, 0.0, [1.0], 1.0), step)
    return np.max(np.abs(sol.states[:, 0] - np.exp(-sol.times)))


def test_exponential_decay():
    sol = integrate_ivp(IvpProblem(lambda t, x: -x, 0.0, [1.0], 1.0), 1e-3)
    assert sol.times[-1] == 1.0
    assert abs(sol.states[-1, 0] - 0.3678794412) <= 1e-8


def test_constant_rhs():
    sol = integrate_ivp(IvpProblem(lambda t, x: np.zeros_like(x), 0.0, [2.5, -1.0], 3.0), 0.1)
    np.testing.assert_array_equal(sol.states, np.tile([2.5, -1.0], (sol.times.size, 1)))


def test_rk4_order():
    ratio = decay_error(1e-2) / decay_error(5e-3)
    assert 12 <= ratio <= 20


def test_last_step_shortened():
    sol = integrate_ivp(IvpProblem(lambda t, x: np.ones_like(x), 0.0, [0.0], 1.0), 0.3)
    np.testing.assert_allclose(sol.times, [0, 0.3, 0.6, 0.9, 1.0])
    np.testing.assert_allclose(sol.states[:, 0], sol.times)


def test_time_dependent_rhs():
    sol = integrate_ivp(IvpProblem(lambda t, x: np.cos(t) * np.ones_like(x), 0.0, [0.0], 2.0), 1e-2)
    np.testing.assert_allclose(sol.states[:, 0], np.sin(sol.times), atol=1e-9)


def test_non_finite():
    with pytest.raises(NonFinite):
        integrate_ivp(IvpProblem(lambda t, x: x * np.inf, 0.0, [1.0], 1.0), 0.1)


def test_grid_sampling_with_substeps():
    problem = IvpProblem(lambda t, x: -x, 0.0, [1.0], 1.0)
    times = TimeGrid(1.0, 6).times
    sol = integrate_ivp(problem, 1e-3, times)
    np.testing.assert_array_equal(sol.times, times)
    np.testing.assert_allclose(sol.states[:, 0], np.exp(-times), atol=1e-12)


def test_sis_logistic():
    sis = builtin("sis", {"beta": 2, "gamma": 1})
    sol = meanfield_trajectory(sis, [0.1], 1.0, 1e-3)
    exact = logistic(1.0, 0.1, 2.0, 1.0)
    assert exact == pytest.approx(0.20231, abs=1e-4)
    assert abs(sol.states[-1, 0] - exact) <= 1e-6


def test_sis_equilibrium_at_zero():
    sis = builtin("sis", {"beta": 2, "gamma": 1})
    sol = meanfield_trajectory(sis, [0.0], 5.0, 1e-2)
    assert np.all(sol.states == 0)


def test_bipartite_symmetry():
    model = builtin("bipartite_si", {"bm": 1.5, "bf": 1.5})
    sol = meanfield_trajectory(model, [0.9, 0.1, 0.9, 0.1], 5.0, 1e-3, TimeGrid(5.0, 51))
    assert np.max(np.abs(sol.states[:, :2] - sol.states[:, 2:])) <= 1e-12
    # stays in the unit box and conserves each population
    assert np.all((sol.states >= -1e-9) & (sol.states <= 1 + 1e-9))
    np.testing.assert_allclose(sol.states[:, 0] + sol.states[:, 1], 1.0, atol=1e-12)


@pytest.mark.parametrize("name, params, x0", [
    ("sis", {"beta": 2, "gamma": 1}, [0.2]),
    ("sis", {"beta": 0.5, "gamma": 1}, [0.9]),
    ("pure_death", {"gamma": 1}, [1.0]),
    ("bipartite_si", {"bm": 2, "bf": 0.5}, [0.8, 0.2, 0.6, 0.4]),
])
def test_meanfield_stays_in_domain(name, params, x0):
    model = builtin(name, params)
    sol = meanfield_trajectory(model, x0, 10.0, 1e-2)
    assert np.all(model.domain.contains(sol.states, tol=1e-9))


def test_reference_moment_trajectory():
    zero = OdeSolution(np.array([0.0, 1.0]), np.zeros((2, 2)))
    np.testing.assert_array_equal(reference_moment_trajectory(zero).states, np.zeros((2, 3)))
    one = OdeSolution(np.array([0.0]), np.array([[0.3, 0.4]]))
    assert reference_moment_trajectory(one).states[0, 2] == pytest.approx(0.25)


def test_squared_norm_derivative_matches_m2bar():
    sis = builtin("sis", {"beta": 2, "gamma": 1})
    step = 1e-2
    sol = meanfield_trajectory(sis, [0.1], 5.0, step)
    z = reference_moment_trajectory(sol)
    dz = (z.states[2:, 1] - z.states[:-2, 1]) / (2 * step)
    expected = m2bar(sis, sol.states[1:-1])
    assert np.max(np.abs(dz - expected)) <= 10 * step ** 2


def test_interpolation():
    sol = OdeSolution(np.array([0.0, 1.0, 2.0]), np.array([[0.0], [1.0], [4.0]]))
    np.testing.assert_allclose(sol.at([0.5, 1.5]), [[0.5], [2.5]])


def test_closed_form_helper_agrees_with_reference_formula():
    assert logistic(0.0, 0.1, 2.0, 1.0) == pytest.approx(0.1)
    # independent check of the closed form by tight-step integration of x' = x - 2x^2
    sol = integrate_ivp(IvpProblem(lambda t, x: x - 2 * x * x, 0.0, [0.1], 3.0), 1e-4)
    assert math.isclose(sol.states[-1, 0], logistic(3.0, 0.1, 2.0, 1.0), rel_tol=1e-12)
