"""Collects the acceptance-criterion outcomes and prints one line per criterion."""
import pytest

RESULTS = {}


@pytest.fixture
def report(request):
    """``report(detail)`` attaches a short measured value to the criterion line."""
    details = []
    request.node.criterion_details = details
    return details.append


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when != "call" and not rep.failed:
        return
    n = mark.args[0]
    ok, details = RESULTS.get(n, (True, []))
    details = details + list(getattr(item, "criterion_details", []))
    RESULTS[n] = (ok and rep.passed, details)


def pytest_terminal_summary(terminalreporter):
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(RESULTS):
        ok, details = RESULTS[n]
        line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}"
        if details:
            line += "  (" + "; ".join(details) + ")"
        terminalreporter.write_line(line)
