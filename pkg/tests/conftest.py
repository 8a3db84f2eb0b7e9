import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from nvsim.ensemble import powder_orientations  # noqa: E402

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def powder512():
    return powder_orientations(512)


@pytest.fixture(scope="session")
def powder256():
    return powder_orientations(256)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
