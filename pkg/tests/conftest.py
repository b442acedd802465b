import numpy as np
import pytest

from polar_ura.codebook import config_from_counts, reference_snr_table

LENGTHS_10 = [3584, 4096, 4608, 5120, 5632, 6144, 6656, 7168, 7680, 8192]
K200_COUNTS = [
    dict(zip(LENGTHS_10, [27, 18, 11, 17, 18, 15, 11, 11, 11, 11])),
    {4096: 4, 4608: 10, 5120: 18, 5632: 18},
]


@pytest.fixture(scope="session")
def k200_layout():
    """Two-level K_a = 200 layout with reference counts and P_1 from its seed class."""
    return config_from_counts(200, K200_COUNTS, reference_snr_table())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE_KEY] = []


@pytest.fixture
def criterion(request):
    """Record one pass/fail line per acceptance criterion, then assert it."""
    lines = request.config.stash[_ACCEPTANCE_KEY]

    def report(name, ok, detail=""):
        line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
        lines.append(line)
        print(line)
        assert ok, line

    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
