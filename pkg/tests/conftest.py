import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from hyperlattice.system import build_system, default_policy  # noqa: E402


@pytest.fixture
def sym2():
    s = build_system(2, [0.3, 0.3], [([0, 1], 0.4)], [1.0, 1.0])
    return s, default_policy(s)


@pytest.fixture
def tri():
    s = build_system(3, [0.2, 0.3, 0.1], [([0, 1, 2], 0.6)], [1.0, 1.2, 0.8])
    return s, default_policy(s)


ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, label, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {n:>2}: {label}; {detail}")
