import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

# acceptance criterion number -> (status, detail)
ACCEPTANCE = {}


def record(criterion, ok, detail):
    ACCEPTANCE[criterion] = ("PASS" if ok else "FAIL", detail)
    return ok


@pytest.fixture
def acceptance():
    return record


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    name = item.name
    if rep.when == "call" and name.startswith("test_criterion_"):
        number = int(name.split("_")[2])
        if rep.failed and ACCEPTANCE.get(number, ("", ""))[0] != "FAIL":
            detail = ACCEPTANCE.get(number, ("", "raised before reporting"))[1]
            ACCEPTANCE[number] = ("FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        status, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:>2}: {status}  {detail}")
