import numpy as np
import pytest

from corrsurf.circuit import build_layout, build_memory_circuit


@pytest.fixture(scope="session")
def d3n4():
    return build_memory_circuit(build_layout(3), 4, "Z")


@pytest.fixture(scope="session")
def d3n6():
    return build_memory_circuit(build_layout(3), 6, "Z")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
