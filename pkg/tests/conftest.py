import numpy as np
import pytest

from diraclab.clifford import build_clifford
from diraclab.fields import gaussian_packet, make_grid, make_potential, random_smooth
from diraclab.operators import DiracOperator


def random_spinor(M, seed=0):
    rng = np.random.default_rng(seed)
    return rng.normal(size=M) + 1j * rng.normal(size=M)


@pytest.fixture(scope="session")
def grid3():
    return make_grid(3, 6.0, 16)


@pytest.fixture(scope="session")
def op3_free(grid3):
    return DiracOperator(build_clifford(3), grid3, make_potential("zero"), 1.0)


@pytest.fixture(scope="session")
def op3_rot(grid3):
    return DiracOperator(build_clifford(3), grid3, make_potential("rotational", eps=0.1), 1.0)


@pytest.fixture(scope="session")
def packet3(grid3):
    return gaussian_packet(grid3, 8, center=(0.4, -0.3, 0.2), width=1.0, momentum=(0.5, 0.0, -0.5),
                           spinor=random_spinor(8, 3))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def smooth3(grid3):
    return random_smooth(grid3, 8, np.random.default_rng(7), spread=0.15, width=(0.15, 0.2), momentum=0.5)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def record_acceptance(label, passed, detail):
    line = f"[{'PASS' if passed else 'FAIL'}] {label}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
