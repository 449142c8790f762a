import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

# derandomized so a green suite stays green; numba compilation on first
# use would trip the default deadline
settings.register_profile(
    "repo", derandomize=True, deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("repo")


def positions(max_n=12, dims=(1, 2), radius=5.0):
    """Strategy for ``(N, d)`` arrays of finite coordinates in ``[-radius, radius]``."""
    coord = st.floats(-radius, radius, allow_nan=False, allow_infinity=False, width=64)
    return st.tuples(st.integers(1, max_n), st.sampled_from(dims)).flatmap(
        lambda shape: arrays(np.float64, shape, elements=coord)
    )


# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES = {}


def record_criterion(number, passed, detail):
    line = "criterion %2d: %s  %s" % (number, "PASS" if passed else "FAIL", detail)
    ACCEPTANCE_LINES[number] = line
    print(line)


@pytest.fixture
def criterion():
    return record_criterion


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[number])
