"""Collects acceptance-criterion outcomes and prints one line per criterion."""
import pytest

_RESULTS = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    n, title = mark.args
    failed = rep.failed
    if rep.when == "call" or failed:
        entry = _RESULTS.setdefault(n, {"title": title, "passed": True, "details": []})
        entry["passed"] = entry["passed"] and not failed
        if rep.when == "call":
            entry["details"] += [f"{k}={v}" for k, v in item.user_properties]


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_RESULTS):
        e = _RESULTS[n]
        status = "PASS" if e["passed"] else "FAIL"
        line = f"criterion {n:>2} {status}  {e['title']}"
        if e["details"]:
            line += "  [" + ", ".join(e["details"]) + "]"
        tr.write_line(line)
    passed = sum(e["passed"] for e in _RESULTS.values())
    tr.write_line(f"{passed}/{len(_RESULTS)} criteria passed")
