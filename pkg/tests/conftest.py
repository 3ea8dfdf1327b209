import numpy as np
import pytest

from bcgain.canonical import REGIMES, RegimeQuad
from bcgain.dynamics import DiscreteClosedLoop, GainSetting, PlantModel, discretize

TABLE1_QUAD = RegimeQuad(50.0, 100.0, 20.0, 40.0)
ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def quad():
    return TABLE1_QUAD


@pytest.fixture(scope="session")
def regime_loops():
    plant = PlantModel.scalar(1.0, 0.02)
    return {r: discretize(plant, TABLE1_QUAD.gains(r)) for r in REGIMES}


@pytest.fixture
def co_loop(regime_loops):
    return regime_loops["CO"]


def random_stable_loop(rng, d, k=None, n=None, rho=None):
    """Random dense loop with prescribed spectral radius and C = [I_n, 0]."""
    k = k or max(d // 2, 1)
    n = n or max(d // 2, 1)
    a = rng.standard_normal((d, d))
    target = rng.uniform(0.3, 0.95) if rho is None else rho
    a *= target / max(abs(np.linalg.eigvals(a)))
    b = rng.standard_normal((d, k))
    c = np.eye(n, d)
    return DiscreteClosedLoop.from_matrices(a, b, c)


def random_psd(rng, k):
    g = rng.standard_normal((k, k))
    return g @ g.T / k + 0.1 * np.eye(k)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
