import math
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).resolve().parent))

from elmorrey.grid import Grid3  # noqa: E402

settings.register_profile(
    "elmorrey",
    max_examples=25,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("elmorrey")

_CRITERIA = {}


@pytest.fixture
def record_criterion():
    """Store one acceptance line; the terminal summary prints them in order."""

    def record(number, passed, detail):
        _CRITERIA[number] = (bool(passed), detail)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA, key=lambda k: (int(str(k).rstrip("ab")), str(k))):
        passed, detail = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def g32():
    return Grid3(32, math.pi)


@pytest.fixture(scope="session")
def g64():
    return Grid3(64, math.pi)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
