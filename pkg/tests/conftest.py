import numpy as np
import pytest


class IdentityMap:
    """Feature map phi(x) = x, for checking update arithmetic on plain numbers."""

    def __init__(self, d: int = 1):
        self.dim = d
        self.input_dim = d

    def transform(self, X):
        return np.atleast_2d(np.asarray(X, dtype=np.float64)).reshape(-1, self.dim).copy()

    def map(self, x):
        return np.asarray(x, dtype=np.float64).reshape(self.dim).copy()


@pytest.fixture
def identity_map():
    return IdentityMap


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# Pass/fail lines from the acceptance suite, echoed in the terminal summary.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
