"""Shared fixtures; acceptance results are echoed at the end of the run."""
import pytest

from bayesexplore.model import distinguishing_example, example1

_ACCEPTANCE = []


@pytest.fixture
def acceptance():
    """Record one pass/fail line per acceptance criterion."""

    def record(number, passed, detail):
        _ACCEPTANCE.append((number, bool(passed), detail))
        return passed

    return record


@pytest.fixture(scope="session")
def ex1():
    return example1()


@pytest.fixture(scope="session")
def dist_inst():
    return distinguishing_example()


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(_ACCEPTANCE, key=lambda x: x[0]):
        terminalreporter.write_line(f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}")
