import numpy as np
import pytest

from pha_sk.instance import sample_instance
from pha_sk.legendre import DualEntropy
from pha_sk.parisi import ParisiMeasure, bundled_measure, solve_pde


@pytest.fixture(scope="session")
def mu2():
    return bundled_measure(2.0)


@pytest.fixture(scope="session")
def sol2(mu2):
    return solve_pde(mu2, 2.0)


@pytest.fixture(scope="session")
def de2(sol2):
    return DualEntropy(sol2, 1e-3)


@pytest.fixture(scope="session")
def mu1():
    return bundled_measure(1.0)


@pytest.fixture(scope="session")
def sol1(mu1):
    return solve_pde(mu1, 1.0)


@pytest.fixture(scope="session")
def de1(sol1):
    return DualEntropy(sol1, 1e-3)


@pytest.fixture(scope="session")
def sol_rs():
    """mu = delta_0 at beta = 1: Phi = log 2cosh x + (1 - t)."""
    return solve_pde(ParisiMeasure.delta0(), 1.0)


@pytest.fixture(scope="session")
def sol_d1():
    """mu = delta_1 at beta = 1: Phi(t, x) = E log 2cosh(x + sqrt(2(1 - t)) Z)."""
    return solve_pde(ParisiMeasure.delta1(), 1.0)


@pytest.fixture
def inst64():
    return sample_instance(64, 11)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_ACCEPTANCE: list[str] = []


def pytest_runtest_logreport(report):
    if report.when == "call":
        _ACCEPTANCE.extend(v for k, v in report.user_properties if k == "acceptance")


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
