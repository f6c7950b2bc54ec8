import time

import pytest

from certpong.harness import CompareConfig, compare_architectures

DESK = CompareConfig(checkpoints=(25_000, 50_000, 100_000, 200_000), seeds=(0, 1, 2, 3, 4),
                     target_points=500)

_criteria: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number")


@pytest.fixture(scope="session")
def desk_report():
    """The desk-scale architecture comparison, run once per session (about a minute)."""
    start = time.perf_counter()
    report = compare_architectures(DESK)
    report.elapsed = time.perf_counter() - start
    return report


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    n, title = marker.args
    if call.when == "call" or (call.when == "setup" and call.excinfo is not None):
        status = "PASS" if call.excinfo is None else "FAIL"
        _criteria[n] = (title, status)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        title, status = _criteria[n]
        terminalreporter.write_line(f"[{status}] criterion {n:2d}: {title}")
