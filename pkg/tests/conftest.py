"""Collects one PASS/FAIL line per acceptance criterion for the terminal summary."""

_CRITERIA = {}


def pytest_runtest_makereport(item, call):
    if call.when != "call" or not item.name.startswith("test_criterion_"):
        return
    n = int(item.name.split("_")[2])
    detail = dict(item.user_properties).get("detail", "")
    _CRITERIA[n] = ("PASS" if call.excinfo is None else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        status, detail = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n}: {status}  {detail}")
