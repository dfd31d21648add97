import numpy as np
import pytest

from gridbandit import GridSpec, TrialStreams

# pass/fail lines registered by the acceptance suite, echoed after the run
CRITERION_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if CRITERION_LINES:
        terminalreporter.section("acceptance criteria")
        for line in CRITERION_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def spec():
    return GridSpec()


@pytest.fixture
def streams():
    def make(seed=0):
        return TrialStreams.from_seed(seed)

    return make


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
