import re

import pytest

CRITERIA: dict[str, str] = {}


def record_criterion(label, name: str, passed: bool, detail: str) -> None:
    label = str(label)
    line = f"criterion {label:<4} {'PASS' if passed else 'FAIL'}  {name}: {detail}"
    CRITERIA[label] = line
    print(line)


@pytest.fixture
def criterion():
    return record_criterion


def _order(label):
    m = re.match(r"(\d+)(.*)", label)
    return int(m.group(1)), m.group(2)


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(CRITERIA, key=_order):
        terminalreporter.write_line(CRITERIA[label])
