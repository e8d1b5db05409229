import numpy as np
import pytest

from sobolev_bvp.config import build_instance, config_from_dict
from sobolev_bvp.funcspace import Grid, make_grid_function

GRID_2000 = Grid(0.0, 1.0, 2000)


def problem_config(command="solve", **kw):
    d = {"command": command, "interval": [0, 1], "grid": 2000, "n": 0, "p": 2, "m": 1, "r": 1}
    d.update(kw)
    return config_from_dict(d)


def problem(**kw):
    """Base instance (eps = 0) of an inline config."""
    return build_instance(problem_config(**kw), 0.0, base=True)


def scalar_fn(grid, order, *derivs):
    """Scalar grid function from closed-form derivative callables."""
    return make_grid_function(grid, order, lambda t: [d(t) for d in derivs])


@pytest.fixture
def grid2000():
    return GRID_2000


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
