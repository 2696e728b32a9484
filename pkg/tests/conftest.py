"""Collects acceptance results and prints one line per criterion at the end."""

import pytest

_results = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def _reason(rep):
    lines = str(rep.longrepr).splitlines()
    errors = [ln[1:].strip() for ln in lines if ln.startswith("E ")]
    return errors[0] if errors else lines[-1].strip()


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    failed = rep.failed or (rep.when == "call" and rep.skipped)
    if rep.when == "call" or failed:
        prev = _results.get(number, (title, True, ""))
        ok = prev[1] and not failed
        detail = prev[2] or (_reason(rep) if failed else "")
        _results[number] = (title, ok, detail)


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_results):
        title, ok, detail = _results[number]
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {title}"
        if not ok and detail:
            line += f"  [{detail[:160]}]"
        terminalreporter.write_line(line)
