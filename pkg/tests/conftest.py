import math

import numpy as np
import pytest

from nlslab.dynamics import PhysicsParams
from nlslab.grid import Grid
from nlslab.oracles import GaussianSpec, gaussian_initial

# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES: dict[int, str] = {}


def record_acceptance(number: int, passed: bool, detail: str) -> None:
    ACCEPTANCE_LINES[number] = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])


@pytest.fixture
def small_grid():
    return Grid(16 * math.pi, 512, 1)


@pytest.fixture
def gaussian_field(small_grid):
    return gaussian_initial(GaussianSpec(), small_grid)


@pytest.fixture
def quintic():
    return PhysicsParams(-1.0, 4.0, 1)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)
