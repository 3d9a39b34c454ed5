"""Collects acceptance outcomes and prints one line per criterion at the end of the run."""
from collections import defaultdict

import pytest

_results: dict[int, list] = defaultdict(list)
_titles: dict[int, str] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion check")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    n, title = mark.args
    _titles[n] = title
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        ok = rep.passed and not hasattr(rep, "wasxfail")
        note = ""
        if hasattr(rep, "wasxfail"):
            note = rep.wasxfail
        elif rep.failed:
            note = str(rep.longrepr).strip().splitlines()[-1]
        _results[n].append((item.name, ok, note))


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_results):
        checks = _results[n]
        ok = all(c[1] for c in checks)
        line = f"criterion {n:>2} {'PASS' if ok else 'FAIL'}  {_titles[n]}"
        terminalreporter.write_line(line)
        for name, passed, note in checks:
            if not passed:
                terminalreporter.write_line(f"    {name}: {note}")
