import os
import sys

import pytest

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
CONFIGS = os.path.join(ROOT, "configs")
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

# filled by test_acceptance; printed once at the end of the session
ACCEPTANCE_LINES: dict = {}


def config_path(name):
    return os.path.join(CONFIGS, name)


@pytest.fixture
def configs_dir():
    return CONFIGS


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES.values():
        terminalreporter.write_line(line)
