import pytest

from meanfield.study import RunConfig, run_convergence_study

ACCEPTANCE_LINES = []


def record(number, name, passed, detail=""):
    status = "PASS" if passed else "FAIL"
    ACCEPTANCE_LINES.append(f"[{status}] criterion {number:>2}: {name}" + (f" ({detail})" if detail else ""))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def sis_study():
    """SIS beta=2, gamma=1, x0=0.2, T=5, n in {100, 400, 1600}, 2000 replicas, seed 42."""
    config = RunConfig(n_list=(100, 400, 1600), x0=(0.2,), builtin_name="sis",
                       params={"beta": 2.0, "gamma": 1.0}, replicas=2000, t_end=5.0,
                       grid_points=51, ode_step=1e-3, seed=42)
    return run_convergence_study(config)
