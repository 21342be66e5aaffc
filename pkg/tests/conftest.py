import os
import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from conekit.polytope import LabelledPolytope, interval, load_polytope, simplex

sys.path.insert(0, str(Path(__file__).parent))

DATA = Path(__file__).resolve().parents[1] / "data"

settings.register_profile(
    "conekit", deadline=None, max_examples=40, derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "conekit"))

TRAPEZOID_FACETS = [((1, 0), 0), ((0, 1), 0), ((0, -1), 1), ((-1, -1), 2)]


@pytest.fixture(scope="session")
def data_dir():
    return DATA


@pytest.fixture(scope="session")
def unit_interval():
    return interval()


@pytest.fixture(scope="session")
def triangle():
    return simplex(2)


@pytest.fixture(scope="session")
def trapezoid():
    return LabelledPolytope(TRAPEZOID_FACETS)


def corpus():
    """Every polytope shipped in data/ plus the 3-simplex."""
    out = {p.stem: load_polytope(p) for p in sorted(DATA.glob("*.json"))}
    out["simplex3"] = simplex(3)
    return out


@pytest.fixture(scope="session")
def corpus_polytopes():
    return corpus()


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
