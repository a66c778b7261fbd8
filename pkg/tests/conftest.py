import pytest

from stickymc.rng import derive_run_seed

from acceptance_log import RESULTS


@pytest.fixture
def rng():
    return derive_run_seed(20240607, 0)


def pytest_terminal_summary(terminalreporter):
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
