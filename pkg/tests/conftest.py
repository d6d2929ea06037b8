import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from services.elliptic import DirichletSolveOptions  # noqa: E402
from services.grid import DomainShape, discretize_domain, make_grid  # noqa: E402
from services.phantoms import pipeline_for  # noqa: E402

RUN_SLOW = os.getenv("PAT_RUN_SLOW", "0") == "1"

# Tight CG tolerance for identities that rely on linearity of the solve
TIGHT = DirichletSolveOptions(tol=1e-12)


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: N = 128 acceptance runs, enabled with PAT_RUN_SLOW=1")


def pytest_collection_modifyitems(config, items):
    if RUN_SLOW:
        return
    skip = pytest.mark.skip(reason="set PAT_RUN_SLOW=1 to run slow acceptance tests")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def small_grid():
    return make_grid(2.25, 32)


@pytest.fixture
def small_domain(small_grid):
    return discretize_domain(small_grid, DomainShape())


@pytest.fixture
def small_pipeline():
    """Constant speed, T = 1.5, N = 40 with a tight CG tolerance."""
    return pipeline_for(40, 1.5, "I", a=2.75, elliptic=TIGHT)


@pytest.fixture
def small_variable_pipeline():
    return pipeline_for(40, 1.5, "II", a=2.75, elliptic=TIGHT)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
