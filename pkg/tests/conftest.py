import numpy as np
import pytest
from hypothesis import strategies as st

from carleson.measure import DiscreteMeasure


@st.composite
def clouds(draw, dim=None, max_atoms=40, s=None):
    """Random discrete measures with distinct atoms."""
    d = draw(st.sampled_from([2, 3])) if dim is None else dim
    n = draw(st.integers(1, max_atoms))
    seed = draw(st.integers(0, 2 ** 31 - 1))
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-1.0, 1.0, size=(n, d)) * draw(st.sampled_from([0.25, 1.0, 4.0]))
    pts = np.unique(pts, axis=0)
    w = rng.uniform(0.1, 2.0, size=pts.shape[0])
    return DiscreteMeasure(pts, w, float(d - 1) if s is None else s)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
