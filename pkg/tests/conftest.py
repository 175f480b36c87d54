import json
import math
from pathlib import Path

import pytest

from layered_isp.medium import Medium

FROZEN = Path(__file__).parent / "oracles" / "frozen.json"


@pytest.fixture(scope="session")
def oracle():
    """Values frozen from independent mpmath evaluations (see oracles/generate.py)."""
    return json.loads(FROZEN.read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def ref_medium():
    return Medium(2.0, 2.0 - math.pi / 1000)


# acceptance lines collected by test_acceptance.py, printed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
