import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from csentangle.hamiltonian import build_harmonic, build_kerr_pair

ACCEPTANCE_LINES = pytest.StashKey[list]()

settings.register_profile(
    "numerics",
    deadline=None,
    max_examples=25,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("numerics")


@pytest.fixture(scope="session")
def harmonic():
    return build_harmonic(1.0)


@pytest.fixture(scope="session")
def kerr_pair():
    return build_kerr_pair(1.0, 1.0, 0.1)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
