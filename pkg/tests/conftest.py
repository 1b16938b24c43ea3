import numpy as np
import pytest

from sdnplan.instance import ProblemInstance, build_instance
from sdnplan.topology import bundled, load_topology

FIG1_R = [2, 3, 2, 5, 3, 3]


@pytest.fixture(scope="session")
def fig1_topology():
    return load_topology(bundled("fig1"))


@pytest.fixture(scope="session")
def fig1(fig1_topology):
    """The six-switch motivation network: A=6, gamma=3, M=12."""
    return build_instance(fig1_topology, None, capacity=6, gamma=3, budget=12)


@pytest.fixture(scope="session")
def att_topology():
    return load_topology(bundled("Att"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def small_instance(r, d=None, capacity=10, budget=10, gamma=1, lam=None):
    n = len(r)
    d = np.zeros((n, n)) if d is None else np.asarray(d, dtype=float)
    return ProblemInstance.create(r, d, capacity, budget, gamma, lam)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LOG: dict[str, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LOG:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LOG):
            terminalreporter.write_line(ACCEPTANCE_LOG[key])
