import numpy as np
import pytest

from ksgl.oracle import random_ksum


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def pd_ksum(rng):
    def make(dims):
        return random_ksum(rng, dims, pd=True)
    return make


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
