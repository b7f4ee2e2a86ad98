import numpy as np
import pytest

# Filled by tests/test_acceptance.py: (criterion, passed, detail, seconds).
ACCEPTANCE_LINES = []


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for crit, ok, detail, secs in sorted(ACCEPTANCE_LINES, key=lambda r: r[0]):
        terminalreporter.write_line(f"criterion {crit:2d}: {'PASS' if ok else 'FAIL'} ({secs:.2f}s) {detail}")
