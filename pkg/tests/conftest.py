import numpy as np
import pytest

from interpnn.core import LabeledDataset, RngSeed, Task


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def line_dataset():
    """Four collinear points at x = 0, 1, 2, 3."""
    return LabeledDataset([[0.0], [1.0], [2.0], [3.0]], [0.0, 1.0, 0.0, 1.0], Task.CLASSIFICATION)


@pytest.fixture
def seed():
    return RngSeed(12345)


# ---------------------------------------------------------------- acceptance report

_ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Record one pass/fail line for an acceptance criterion."""
    lines = request.config.stash.setdefault(_ACCEPTANCE_KEY, [])

    def record(number, title, ok, detail=""):
        line = f"criterion {number} {'PASS' if ok else 'FAIL'}: {title}" + (f" | {detail}" if detail else "")
        lines.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
