import time

import pytest

from triehh.dataset import UserDataset

_criteria: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): acceptance criterion gate")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    number, title = marker.args
    entry = _criteria.setdefault(number, {"title": title, "ok": True, "seconds": 0.0, "tests": 0})
    if rep.when in ("setup", "call"):
        entry["seconds"] += rep.duration
    if rep.when == "call":
        entry["tests"] += 1
    if rep.failed:
        entry["ok"] = False


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        e = _criteria[number]
        status = "PASS" if e["ok"] else "FAIL"
        terminalreporter.write_line(
            f"criterion {number}: {status}  {e['title']}  ({e['tests']} tests, {e['seconds']:.2f}s)"
        )


@pytest.fixture
def toy_words():
    fillers = ["apple", "bread", "cloud", "delta", "eagle", "flute", "grape", "house", "igloo"]
    return ["star"] * 3 + ["sun"] * 4 + ["moon"] * 4 + fillers


@pytest.fixture
def toy(toy_words):
    return UserDataset.from_words(toy_words, max_length=10)


@pytest.fixture
def stopwatch():
    start = time.perf_counter()
    return lambda: time.perf_counter() - start
