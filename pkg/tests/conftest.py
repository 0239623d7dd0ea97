import time

import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240501)


# Acceptance-criterion reporting: one PASS/FAIL line per criterion at the end.
_criteria: dict = {}


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None or call.when != "call":
        return
    number, title = marker.args
    entry = _criteria.setdefault(number, {"title": title, "ok": True, "secs": 0.0})
    entry["ok"] = entry["ok"] and call.excinfo is None
    entry["secs"] += call.stop - call.start
    entry.update(dict(item.user_properties))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        e = _criteria[number]
        status = "PASS" if e["ok"] else "FAIL"
        detail = f"  [{e['detail']}]" if "detail" in e else ""
        terminalreporter.write_line(f"criterion {number:>2} {status}  {e['title']}  ({e['secs']:.2f}s){detail}")


@pytest.fixture
def stopwatch():
    start = time.perf_counter()
    return lambda: time.perf_counter() - start
