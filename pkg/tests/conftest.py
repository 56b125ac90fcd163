import numpy as np
import pytest
from hypothesis import HealthCheck, settings, strategies as st

from twomode.repkit import BlockLabel, ModelParams

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

DEGREES = [(1, 1), (2, 1), (1, 2), (2, 2), (3, 3)]

coupling = st.floats(-2, 2, allow_nan=False, allow_infinity=False)
nonzero_g = st.one_of(st.floats(0.1, 2), st.floats(-2, -0.1))


@st.composite
def model_and_block(draw, degrees=DEGREES, max_M=6, g=coupling):
    s, r = draw(st.sampled_from(degrees))
    w = [draw(coupling) for _ in range(5)]
    model = ModelParams(s, r, *w, draw(g))
    label = BlockLabel(draw(st.integers(0, max_M)), draw(st.integers(0, s - 1)),
                       draw(st.integers(0, r - 1)))
    return model, label


@pytest.fixture
def doublet():
    return ModelParams(1, 1, w1=1.0, g=0.5), BlockLabel(1, 0, 0)


def random_models(seed, degrees=DEGREES, draws=1, min_g=0.0):
    rng = np.random.default_rng(seed)
    for s, r in degrees:
        for _ in range(draws):
            w = rng.uniform(-2, 2, 6)
            while abs(w[5]) < min_g:
                w[5] = rng.uniform(-2, 2)
            yield ModelParams(s, r, *w)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def record_acceptance(number, title, passed, detail):
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {number} {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)
