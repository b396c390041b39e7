import math

import numpy as np
import pytest
from hypothesis import strategies as st

from cvrsp import components as comp
from cvrsp.gaussian import GaussianState, apply_channel, direct_sum


def random_state(rng, mode_count):
    """Thermal inputs through random squeezers, a random splitter and random losses."""
    n = rng.uniform(0.0, 0.5, mode_count)
    state = GaussianState.thermal(n, mode_count)
    sq = [comp.squeezer_channel(comp.SqueezerSpec(rng.uniform(0, 1.5), rng.uniform(0, math.pi))) for _ in range(mode_count)]
    state = apply_channel(state, direct_sum(*sq))
    if mode_count == 2:
        state = apply_channel(state, comp.coupler_channel(comp.CouplerSpec.from_tau(rng.uniform(0.05, 0.95))))
        state = apply_channel(state, comp.two_mode_loss_channel(comp.LossSpec(rng.uniform(0, 0.5)), comp.LossSpec(rng.uniform(0, 0.5))))
    else:
        state = apply_channel(state, comp.loss_channel(comp.LossSpec(rng.uniform(0, 0.5))))
    mean = rng.normal(0.0, 0.5, 2 * mode_count)
    return GaussianState(mean, state.cov)


@st.composite
def physical_states(draw, mode_count=None):
    m = draw(st.sampled_from([1, 2])) if mode_count is None else mode_count
    seed = draw(st.integers(0, 2**32 - 1))
    return random_state(np.random.default_rng(seed), m)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    lines = []
    for reports in terminalreporter.stats.values():
        for rep in reports:
            if getattr(rep, "when", None) != "call":
                continue
            lines += [value for name, value in getattr(rep, "user_properties", ()) if name == "acceptance"]
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
