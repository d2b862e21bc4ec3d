import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from exrisk.dictionary import Fourier, Histogram  # noqa: E402
from exrisk.scenario import Dataset, preset  # noqa: E402


@pytest.fixture
def default_scenario():
    return preset("default")


@pytest.fixture
def hist16():
    return Histogram(16)


@pytest.fixture
def fourier5():
    return Fourier(5)


@pytest.fixture
def tiny_dataset():
    """Four points, two per bin of the D=2 histogram."""
    return Dataset(np.array([0.1, 0.2, 0.6, 0.9]), np.array([1.0, 0.0, 0.5, 0.5]), seed=0)


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import LINES
    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(LINES):
            terminalreporter.write_line(line)
