import os

import numpy as np
import pytest

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
WBC_PATH = os.path.join(ROOT, "data", "breast-cancer-wisconsin.data")
WDBC_PATH = os.path.join(ROOT, "data", "wdbc.data")

_criteria = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, text): acceptance criterion")
    config.addinivalue_line("markers", "slow: long-running end-to-end training")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        status = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[rep.outcome]
        detail = getattr(item, "criterion_detail", "")
        _criteria.append((mark.args[0], status, mark.args[1], detail, rep.duration))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number, status, text, detail, seconds in sorted(_criteria, key=lambda c: c[0]):
        extra = f" [{detail}]" if detail else ""
        terminalreporter.write_line(f"{status} criterion {number}: {text}{extra} ({seconds:.1f}s)")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def wbc_path():
    return WBC_PATH


@pytest.fixture(scope="session")
def wdbc_path():
    return WDBC_PATH
