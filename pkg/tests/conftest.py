import pytest

from cudfmilp.cudf import parse_document
from helpers import DATA

_ACCEPTANCE: list[tuple[str, bool, str]] = []


@pytest.fixture
def figure1():
    return parse_document((DATA / "figure1.cudf").read_text())


@pytest.fixture
def figure1_visible():
    return parse_document((DATA / "figure1_visible.cudf").read_text())


@pytest.fixture(scope="session")
def acceptance():
    def record(name: str, passed: bool, detail: str = "") -> None:
        _ACCEPTANCE.append((name, passed, detail))

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}  {detail}")
