import json
from pathlib import Path

import numpy as np
import pytest

from polybary.geometry import random_convex_polygon, regular_polygon, validate_polygon

DATA = Path(__file__).parent / "data"
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def frozen():
    return json.loads((DATA / "frozen.json").read_text())


@pytest.fixture
def square():
    return validate_polygon([(0, 0), (1, 0), (1, 1), (0, 1)])


@pytest.fixture
def hexagon():
    return regular_polygon(6)


@pytest.fixture(scope="session")
def random_polygons():
    rng = np.random.default_rng(20240611)
    return [random_convex_polygon(rng, int(n)) for n in rng.integers(3, 11, size=10)]


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
