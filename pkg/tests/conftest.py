import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from bridgegap.precision import make_context  # noqa: E402


@pytest.fixture(scope="session")
def ctx256():
    return make_context(256)


@pytest.fixture(scope="session")
def ctx1024():
    return make_context(1024)


@pytest.fixture(scope="session")
def ctx4000():
    return make_context(4000)


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
