import numpy as np
import pytest

from crib_memory.config import RunSpec
from crib_memory.validation import Validator

ACCEPTANCE_LINES = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def validator():
    """Shared runner on the default grid; caches absorptions across tests."""
    return Validator(RunSpec())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def acceptance_log(request):
    """Collects one result line per acceptance criterion for the final summary."""
    return request.config.stash.setdefault(ACCEPTANCE_LINES, [])


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
