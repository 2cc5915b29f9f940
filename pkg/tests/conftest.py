from pathlib import Path

import pytest

from tradealloc.harness import parse_accounts, parse_allocations, parse_blotter

DATA = Path(__file__).parent / "data"


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")
    config._acceptance = {}


def pytest_runtest_logreport(report):
    item_marker = getattr(report, "criterion", None)
    if item_marker is None:
        return
    results = report.config_ref._acceptance
    number, title = item_marker
    failed = report.failed or (report.when == "call" and report.skipped)
    prev = results.get(number, (title, "PASS"))
    results[number] = (title, "FAIL" if failed or prev[1] == "FAIL" else "PASS")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        report.criterion = tuple(marker.args)
        report.config_ref = item.config


def pytest_terminal_summary(terminalreporter, config):
    results = getattr(config, "_acceptance", {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        title, status = results[number]
        terminalreporter.write_line(f"criterion {number:2d}: {status}  {title}")


@pytest.fixture(scope="session")
def data_dir():
    return DATA


@pytest.fixture(scope="session")
def sample_fills():
    return parse_blotter(DATA / "sample_fills.csv")


@pytest.fixture(scope="session")
def sample_accounts():
    return parse_accounts(DATA / "sample_accounts.csv")


@pytest.fixture(scope="session")
def load_allocations(sample_fills, sample_accounts):
    def load(name):
        return parse_allocations(DATA / "allocations" / f"{name}.csv",
                                 sample_fills, sample_accounts)
    return load
