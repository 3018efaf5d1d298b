import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def rs():
    """Independent numpy generator for test data (not the package streams)."""
    return np.random.default_rng(20240611)


# ---------------------------------------------------------------- acceptance report
# Tests marked ``criterion(n, title)`` are collected into one pass/fail line per
# criterion in the terminal summary; ``record_property("detail", ...)`` adds the
# measured values to the line.

_CRITERIA = pytest.StashKey[dict]()


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion n")
    config.stash[_CRITERIA] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or not (rep.when == "call" or rep.failed or rep.skipped):
        return
    n, title = mark.args
    entry = item.config.stash[_CRITERIA].setdefault(n, {"title": title, "ok": True, "detail": []})
    entry["ok"] &= rep.passed
    if rep.when == "call":
        entry["detail"] += [v for k, v in item.user_properties if k == "detail"]
    else:
        entry["detail"].append(f"{rep.when} {rep.outcome}")


def pytest_terminal_summary(terminalreporter, config):
    results = config.stash[_CRITERIA]
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        r = results[n]
        line = f"criterion {n:>2}  {'PASS' if r['ok'] else 'FAIL'}  {r['title']}"
        if r["detail"]:
            line += "  [" + "; ".join(r["detail"]) + "]"
        terminalreporter.write_line(line)
