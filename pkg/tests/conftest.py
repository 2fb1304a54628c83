import numpy as np
import pytest

from maxmean import SystemSpec


def normals20():
    return [SystemSpec.normal(1.5 + 0.5 * k, 1.5 + 0.5 * k) for k in range(1, 21)]


@pytest.fixture
def normal_arms():
    return normals20()


def within_se(x, target, se, k=4.0):
    return abs(x - target) <= k * se


def mean_and_se(x):
    x = np.asarray(x, float)
    return x.mean(), x.std(ddof=1) / np.sqrt(x.size)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
