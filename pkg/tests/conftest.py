from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings, strategies as st

from dimerflow.graph import builtin, random_connected_spec, validate

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def diamond():
    return validate(builtin("diamond"), decomposition=True)


@st.composite
def random_graphs(draw, n_max: int = 8, complex_initial: bool = True):
    """Random connected weighted graphs, driven by a hypothesis-drawn seed."""
    seed = draw(st.integers(0, 2**32 - 1))
    spec = random_connected_spec(np.random.default_rng(seed), n_max=n_max,
                                 complex_initial=complex_initial)
    return validate(spec, decomposition=True)


def rk4(H, c0, t_end, steps):
    """Classical fourth-order integration of dc/dt = -i H c."""
    c = np.asarray(c0, dtype=complex).copy()
    h = t_end / steps
    f = lambda v: -1j * (H @ v)
    for _ in range(steps):
        k1 = f(c)
        k2 = f(c + 0.5 * h * k1)
        k3 = f(c + 0.5 * h * k2)
        k4 = f(c + h * k3)
        c = c + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return c


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
