"""Shared test plumbing: the acceptance-criteria summary printed after a run."""

_CRITERIA_LINES = {}


def record_criterion(number: int, passed: bool, detail: str) -> None:
    """Collect one acceptance-criterion outcome for the end-of-run summary."""
    status = "PASS" if passed else "FAIL"
    _CRITERIA_LINES[number] = f"criterion {number:2d} {status}  {detail}"


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _CRITERIA_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA_LINES):
        terminalreporter.write_line(_CRITERIA_LINES[number])
