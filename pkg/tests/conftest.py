import pathlib

import pytest

FIXTURES = pathlib.Path(__file__).parent / "fixtures"

_acceptance: list[tuple[str, str]] = []


@pytest.fixture
def fixtures_dir() -> pathlib.Path:
    return FIXTURES


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    if "test_acceptance.py" not in report.nodeid:
        return
    label = report.nodeid.split("::")[-1]
    _acceptance.append((label, "PASS" if report.outcome == "passed" else "FAIL"))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for label, verdict in _acceptance:
        terminalreporter.write_line(f"{verdict}  {label}")
