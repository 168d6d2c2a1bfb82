import sys

import numpy as np
import pytest


def same_trace(a, b) -> bool:
    return (a.rounds == b.rounds and np.array_equal(a.arms, b.arms)
            and np.array_equal(a.collided, b.collided) and np.array_equal(a.phase, b.phase)
            and a.events == b.events)


@pytest.fixture
def trace_equal():
    return same_trace


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
