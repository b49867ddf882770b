import functools

import pytest

from sistables.datasets import load_fixture
from sistables.model import LoglinearModelSpec, build_constraint_system

# lines collected by the acceptance suite, echoed in the terminal summary
ACCEPTANCE_LINES: dict[int, str] = {}


def independence_system(rows: int, cols: int):
    spec = LoglinearModelSpec(factors=(("a", rows), ("b", cols)), margin_sets=(("a",), ("b",)))
    return build_constraint_system(spec)


@functools.lru_cache(maxsize=None)
def fixture(name: str):
    return load_fixture(name)


@pytest.fixture(scope="session")
def breslow():
    return fixture("breslow-day-35-44")


@pytest.fixture(scope="session")
def czech():
    return fixture("czech-autoworkers")


@pytest.fixture(scope="session")
def dsmall():
    return fixture("dsmall-3x3x3")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
