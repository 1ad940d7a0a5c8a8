import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from gr1perception import scenarios  # noqa: E402
from gr1perception.parser import parse_spec  # noqa: E402
from gr1perception.strategy import synthesize  # noqa: E402

_CACHE = {}


def fixture_spec(name):
    return parse_spec(scenarios.fixture_path(name).read_text())


def synthesized(name, strict=True):
    """Synthesis result of a shipped fixture, cached for the whole session."""
    key = (name, strict)
    if key not in _CACHE:
        _CACHE[key] = synthesize(fixture_spec(name), strict=strict)
    return _CACHE[key]


@pytest.fixture(scope="session")
def work_zone_strategy():
    return synthesized("work_zone").strategy


@pytest.fixture(scope="session")
def stop_sign_strategy():
    return synthesized("stop_sign").strategy


# -- acceptance report ---------------------------------------------------------------------

ACCEPTANCE = {}


@pytest.fixture
def criterion(request):
    """Record one acceptance line: ``criterion(n, ok, detail)``."""
    def record(number, ok, detail):
        ACCEPTANCE[number] = (bool(ok), detail)
        print(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
