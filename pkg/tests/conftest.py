import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

_CRITERIA = {}


def record_criterion(number, passed, detail=""):
    """Store one acceptance verdict; the terminal summary prints them in order."""
    _CRITERIA[number] = (bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        passed, detail = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
