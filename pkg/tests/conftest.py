"""Shared fixtures: the mini-berlin network and its synthetic data.

Everything heavyweight is session-scoped; tests treat these objects as
immutable.
"""

from __future__ import annotations

import pytest

from hailsim import fixtures
from hailsim.demand import generate_logbook
from hailsim.logbook import extract_shifts

# filled by tests/test_acceptance.py, printed after the run so the
# one-line-per-criterion report survives pytest's output capture
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def graph():
    return fixtures.mini_berlin()


@pytest.fixture(scope="session")
def year_orders():
    return fixtures.source_year(0)


@pytest.fixture(scope="session")
def year_shifts(year_orders):
    return extract_shifts(year_orders)


@pytest.fixture(scope="session")
def wednesday_logbook(year_shifts):
    return generate_logbook(year_shifts, 2, 50, 0)


@pytest.fixture(scope="session")
def saturday_logbook(year_shifts):
    return generate_logbook(year_shifts, 5, 50, 0)


@pytest.fixture(scope="session")
def hotspot_set(year_orders):
    return fixtures.fixture_hotspots(year_orders)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
