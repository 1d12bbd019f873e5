import math
import os

import pytest
from hypothesis import HealthCheck, settings

os.environ.setdefault("FADEXP_THREADS", "1")

settings.register_profile(
    "fadexp",
    deadline=None,
    max_examples=25,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("fadexp")


@pytest.fixture(scope="session")
def unit_rayleigh():
    from fadexp.fading import rayleigh
    return rayleigh(1.0 / math.sqrt(2.0))


_ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""
    def record(number, title, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {title} | {detail}"
        _ACCEPTANCE_LINES.append((number, line))
        print(line)
        assert ok, line
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
