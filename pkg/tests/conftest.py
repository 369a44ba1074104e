import numpy as np
import pytest

from vmf.grid import FlatTorus, Rectangle, UnitDisk, build_grid


@pytest.fixture(scope="session")
def disk64():
    return build_grid(UnitDisk(), 64)


@pytest.fixture(scope="session")
def square32():
    return build_grid(Rectangle(1.0, 1.0), 32)


@pytest.fixture(scope="session")
def torus32():
    return build_grid(FlatTorus(1.0, 1.0), 32)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "REPORT", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)
