import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

settings.register_profile(
    "default",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
    derandomize=True,
    database=None,
)
settings.load_profile("default")

PROPERTY_EXAMPLES = 1000

unit = st.floats(0.0, 1.0, allow_nan=False)
bias = st.floats(0.5, 1.0, allow_nan=False)
angle = st.floats(-np.pi, np.pi, allow_nan=False)


@st.composite
def ginibre_states(draw, dim=4):
    """Random full-rank-ish density matrix from a complex Ginibre draw."""
    re = draw(st.lists(st.floats(-1, 1), min_size=dim * dim, max_size=dim * dim))
    im = draw(st.lists(st.floats(-1, 1), min_size=dim * dim, max_size=dim * dim))
    g = (np.array(re) + 1j * np.array(im)).reshape(dim, dim) + 1e-3 * np.eye(dim)
    m = g @ g.conj().T
    return m / np.trace(m).real


@st.composite
def simplex_weights(draw, n=4):
    raw = np.array(draw(st.lists(st.floats(0, 1), min_size=n, max_size=n))) + 1e-9
    return raw / raw.sum()


_ACCEPTANCE = []


@pytest.fixture
def acceptance_log():
    """Collects one status line per acceptance criterion for the terminal summary."""

    def record(number, passed, detail):
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'} | {detail}"
        _ACCEPTANCE.append((number, line))
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_ACCEPTANCE):
        terminalreporter.write_line(line)
