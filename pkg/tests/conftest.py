import pytest

from qutritherald.atom_cavity import SystemParams
from qutritherald.optics import SplitterAngle

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def canonical():
    return SplitterAngle.canonical()


@pytest.fixture(params=[10.0, 15.0], ids=["lambda10", "lambda15"])
def benchmark_params(request):
    return SystemParams.symmetric(request.param, 0.1)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
