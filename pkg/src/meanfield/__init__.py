"""Simulate density-dependent jump processes, integrate their mean-field
limit, and compute the constants of a mean-square error envelope."""

from .bounds import (
    BoundsReport,
    Envelope,
    drift_gap,
    gbar_lipschitz_bound,
    gronwall_envelope,
    hessian_bound,
    initial_gap,
    lipschitz_estimate,
    taylor_remainder_check,
    theorem_envelope,
    variance_collapse_check,
)
from .expr import evaluate, free_variables, parse_expression
from .model import DomainBox, ModelSpec, builtin, drift_m1, drift_m2, limit_drifts, load_model
from .ode import IvpProblem, OdeSolution, integrate_ivp, meanfield_trajectory, reference_moment_trajectory
from .sim import EnsembleStats, TimeGrid, mse_vs_reference, run_ensemble, simulate_path

__version__ = "0.1.0"
