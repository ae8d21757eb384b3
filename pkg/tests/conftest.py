import sys

import pytest

from ergodic_riskctl import ModelSpec, solve_boundaries


def pytest_terminal_summary(terminalreporter):
    verdicts = getattr(sys.modules.get("test_acceptance"), "VERDICTS", None)
    if verdicts:
        terminalreporter.section("acceptance criteria")
        for line in verdicts:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def bm():
    return ModelSpec.bm_quadratic(sigma=1.0, c=1.0, K=1.0)


@pytest.fixture(scope="session")
def ou():
    return ModelSpec.ou_quadratic(gamma=2.0, mu=0.0, sigma=1.0, c=1.0, K=1.0)


@pytest.fixture(scope="session")
def ou_shifted():
    return ModelSpec.ou_quadratic(gamma=2.0, mu=0.2, sigma=1.0, c=1.0, K=1.0)


@pytest.fixture(scope="session")
def bm_solution(bm):
    return solve_boundaries(bm, 1.0)


@pytest.fixture(scope="session")
def ou_solution(ou_shifted):
    return solve_boundaries(ou_shifted, 1.0)
