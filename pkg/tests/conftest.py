import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from cryamabe import _backend
from cryamabe.lattice import make_lattice

settings.register_profile(
    "repo", deadline=None, max_examples=25, suppress_health_check=[HealthCheck.function_scoped_fixture]
)
settings.load_profile("repo")

BACKENDS = ["python"] + (["compiled"] if _backend.compiled_available() else [])

# acceptance lines collected by tests/test_acceptance.py
ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture(params=BACKENDS)
def backend(request):
    with _backend.use_backend(request.param):
        yield request.param


@pytest.fixture(scope="session")
def tiny():
    return make_lattice(1, (8, 8, 16))


@pytest.fixture(scope="session")
def small():
    return make_lattice(1, (8, 8, 32))


@pytest.fixture(scope="session")
def standard():
    return make_lattice(1, (16, 16, 64))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
