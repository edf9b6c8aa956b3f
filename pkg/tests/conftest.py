from pathlib import Path

import pytest

from semalloc.model import load_config

DATA = Path(__file__).resolve().parents[1] / "src" / "semalloc" / "data"

_criteria: dict = {}


@pytest.fixture
def data_dir() -> Path:
    return DATA


@pytest.fixture
def two_point():
    return load_config(DATA / "newsvendor_two_point.json")


@pytest.fixture
def singapore():
    return load_config(DATA / "singapore.json")


@pytest.fixture
def reference():
    return load_config(DATA / "reference.json")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    if report.when == "call" or (report.when == "setup" and report.failed):
        _criteria[number] = (title, "PASS" if report.passed else "FAIL")


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, status = _criteria[number]
        terminalreporter.write_line(f"[{status}] criterion {number}: {title}")
