import numpy as np
import pytest

from hoppe.rng import stream


@pytest.fixture
def rng():
    return stream(12345)


def path_parents(n):
    return np.array([-1] + list(range(n - 1)))


def star_parents(n):
    return np.array([-1] + [0] * (n - 1))


# one line per acceptance criterion, collected by tests/test_acceptance.py
ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
