import numpy as np
import pytest

_ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(label): acceptance criterion covered by a test")


def pytest_runtest_logreport(report):
    label = report.user_properties and dict(report.user_properties).get("criterion")
    if not label:
        return
    if report.when == "call" or report.outcome != "passed":
        prev = _ACCEPTANCE.get(label, True)
        _ACCEPTANCE[label] = prev and report.outcome == "passed"


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(_ACCEPTANCE, key=lambda s: int(s.split()[0][2:])):
        terminalreporter.write_line(f"{'PASS' if _ACCEPTANCE[label] else 'FAIL'}  {label}")


@pytest.fixture(autouse=True)
def _criterion(request, record_property):
    marker = request.node.get_closest_marker("criterion")
    if marker:
        record_property("criterion", marker.args[0])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


SUITE_BUDGET_S = 300.0
_START = {}


def pytest_sessionstart(session):
    import time

    _START["t"] = time.perf_counter()


def pytest_sessionfinish(session, exitstatus):
    import time

    elapsed = time.perf_counter() - _START.get("t", time.perf_counter())
    label = f"AC10 full suite under {SUITE_BUDGET_S:.0f} s (took {elapsed:.1f} s)"
    if _ACCEPTANCE:
        _ACCEPTANCE[label] = elapsed < SUITE_BUDGET_S
    if elapsed >= SUITE_BUDGET_S:
        session.exitstatus = 1
