"""Shared problem builders for the test suite."""

import numpy as np
import pytest

from nonsmooth_control.grid import assemble_operator, build_grid
from nonsmooth_control.nonsmooth import max_function
from nonsmooth_control.objective import tracking_problem
from nonsmooth_control.optimizer import solve_continuation


def reference_problem(n=199, **changes):
    """Interval (0, 1), Laplacian, f = max, target 4x(1-x) - 0.3."""
    grid = build_grid((0.0, 1.0), n)
    op = assemble_operator(grid)
    target = grid.sample(lambda x: 4 * x * (1 - x) - 0.3)
    params = dict(nu=1e-2, kappa=5e-3, alpha=-2.0, beta=2.0)
    params.update(changes)
    return tracking_problem(op, max_function(), target, **params)


def square_problem(n=31, target=lambda x1, x2: 0.5 - 4 * ((x1 - 0.5) ** 2 + (x2 - 0.5) ** 2),
                   **changes):
    grid = build_grid([(0.0, 1.0), (0.0, 1.0)], (n, n))
    params = dict(nu=1e-2, kappa=5e-3, alpha=-2.0, beta=2.0)
    params.update(changes)
    return tracking_problem(assemble_operator(grid), max_function(), grid.sample(target), **params)


@pytest.fixture(scope="session")
def reference():
    """Reference problem at n = 199 with its continuation solution."""
    problem = reference_problem()
    report = solve_continuation(problem, None)
    return problem, report


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# PASS/FAIL lines recorded by the acceptance suite, repeated after the test summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: s.split("]")[0].split("[")[1]):
            terminalreporter.write_line(line)
