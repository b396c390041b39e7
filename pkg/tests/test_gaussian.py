import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cvrsp import components as comp
from cvrsp.exceptions import InternalConsistencyError, PhysicalityError, StructuralError
from cvrsp.gaussian import (
    GaussianState,
    LinearChannel,
    MomentSet,
    apply_channel,
    compose,
    direct_sum,
    embed,
    moment_keys,
    moments_from_state,
    state_from_moments,
    symplectic_eigenvalues,
    symplectic_form,
)

from conftest import physical_states


def test_vacuum_and_thermal_covariances():
    assert np.array_equal(GaussianState.vacuum(2).cov, 0.25 * np.eye(4))
    assert np.allclose(GaussianState.thermal(0.04).cov, 0.27 * np.eye(2))


def test_state_rejects_asymmetric_and_unphysical():
    with pytest.raises(StructuralError):
        GaussianState(np.zeros(2), np.array([[0.3, 0.1], [0.0, 0.3]]))
    with pytest.raises(PhysicalityError):
        GaussianState(np.zeros(2), np.diag([0.1, 0.2]))
    with pytest.raises(StructuralError):
        GaussianState(np.zeros(3), np.eye(2))


def test_state_is_immutable():
    s = GaussianState.vacuum()
    with pytest.raises(ValueError):
        s.cov[0, 0] = 1.0


def test_identity_channel_on_vacuum():
    s = apply_channel(GaussianState.vacuum(), LinearChannel.identity())
    assert s.allclose(GaussianState.vacuum())


def test_diagonal_squeeze_on_vacuum():
    r = 1.2
    ch = LinearChannel(np.diag([math.exp(-r), math.exp(r)]))
    s = apply_channel(GaussianState.vacuum(), ch)
    assert np.allclose(np.diag(s.cov), [math.exp(-2.4) / 4, math.exp(2.4) / 4], atol=1e-15)
    assert np.allclose(np.diag(s.cov), [0.0226795, 2.755794], atol=1e-6)


def test_half_loss_on_thermal():
    s = apply_channel(GaussianState.thermal(0.04), comp.loss_channel(comp.LossSpec(0.5)))
    assert np.allclose(s.cov, 0.26 * np.eye(2), atol=1e-15)


def test_dimension_mismatch():
    with pytest.raises(StructuralError):
        apply_channel(GaussianState.vacuum(2), LinearChannel.identity(1))


def test_malformed_channel_is_internal_error():
    shrink = LinearChannel(0.5 * np.eye(2))
    with pytest.raises(InternalConsistencyError):
        apply_channel(GaussianState.vacuum(), shrink)


def test_noise_must_be_psd():
    with pytest.raises(StructuralError):
        LinearChannel(np.eye(2), np.diag([0.1, -0.1]))


def test_symplectic_eigenvalues_examples():
    assert np.allclose(symplectic_eigenvalues(GaussianState.vacuum(2)), [0.25, 0.25], atol=1e-15)
    assert np.allclose(symplectic_eigenvalues(GaussianState.thermal(1.0)), [0.75])


def test_pure_tms_has_vacuum_spectrum():
    s = GaussianState.vacuum(2)
    sq = direct_sum(
        comp.squeezer_channel(comp.SqueezerSpec(0.5, 0.0)),
        comp.squeezer_channel(comp.SqueezerSpec(0.5, math.pi / 2)),
    )
    s = apply_channel(apply_channel(s, sq), comp.hybrid_ring_channel())
    assert np.allclose(symplectic_eigenvalues(s), [0.25, 0.25], atol=1e-12)
    # brute force: eigenvalues of i*Omega*V come in +-nu pairs
    ev = np.sort(np.abs(np.linalg.eigvals(1j * symplectic_form(2) @ s.cov)))
    assert np.allclose(ev, 0.25, atol=1e-12)
    assert math.isclose(np.linalg.det(s.cov), 0.25**4, rel_tol=1e-10)


def test_two_mode_spectrum_matches_delta_formula(rng):
    from conftest import random_state

    for _ in range(20):
        s = random_state(rng, 2)
        a, b, c = s.block(0, 0), s.block(1, 1), s.block(0, 1)
        delta = np.linalg.det(a) + np.linalg.det(b) + 2 * np.linalg.det(c)
        det = np.linalg.det(s.cov)
        nu = np.sqrt([(delta - math.sqrt(delta**2 - 4 * det)) / 2, (delta + math.sqrt(delta**2 - 4 * det)) / 2])
        assert np.allclose(symplectic_eigenvalues(s), nu, atol=1e-10)


def test_moments_of_vacuum_and_thermal():
    v = moments_from_state(GaussianState.vacuum())
    assert v[(1, 1)] == 0 and v[(0, 2)] == 0 and v[(2, 2)] == 0
    t = moments_from_state(GaussianState.thermal(0.04))
    assert abs(t[(1, 1)] - 0.04) < 1e-15
    assert abs(t[(2, 2)] - 0.0032) < 1e-15


def test_moments_of_squeezed_vacuum():
    s = apply_channel(GaussianState.vacuum(), comp.squeezer_channel(comp.SqueezerSpec(1.2, 0.0)))
    ms = moments_from_state(s)
    assert abs(ms[(0, 2)] - (-math.sinh(1.2) * math.cosh(1.2))) < 1e-12
    assert abs(ms[(1, 1)] - math.sinh(1.2) ** 2) < 1e-12
    assert abs(ms[(0, 2)] - (-2.733115)) < 1e-6 and abs(ms[(1, 1)] - 2.278474) < 1e-6


def test_fourth_moment_against_monte_carlo():
    # ladder samples drawn from the Wigner distribution give symmetric-ordered
    # moments; reorder <(a^dag)^2 a^2> = <|a|^4>_W - 2<|a|^2>_W + 1/2
    s = apply_channel(GaussianState.thermal(0.1), comp.squeezer_channel(comp.SqueezerSpec(0.6, 0.4)))
    rng = np.random.default_rng(3)
    x = rng.multivariate_normal(np.zeros(2), s.cov, size=1_000_000)
    a = x[:, 0] + 1j * x[:, 1]
    w4 = np.abs(a) ** 4
    w2 = np.abs(a) ** 2
    estimate = w4 - 2 * w2 + 0.5
    se = estimate.std() / math.sqrt(len(a))
    ms = moments_from_state(s)
    assert abs(estimate.mean() - ms[(2, 2)].real) < 5 * se


def test_state_from_moments_examples():
    assert state_from_moments(moments_from_state(GaussianState.vacuum())).allclose(GaussianState.vacuum())
    table = {k: 0.0 for k in moment_keys(1)}
    table[(0, 0)] = 1.0
    table[(1, 1)] = 0.04
    s = state_from_moments(MomentSet(1, table))
    assert np.allclose(s.cov, 0.27 * np.eye(2), atol=1e-15)
    sq = apply_channel(GaussianState.vacuum(), comp.squeezer_channel(comp.SqueezerSpec(1.2, 0.0)))
    back = state_from_moments(moments_from_state(sq))
    assert np.allclose(back.cov, sq.cov, atol=1e-12)


def test_state_from_moments_rejects_unphysical():
    table = {k: 0.0 for k in moment_keys(1)}
    table[(0, 0)] = 1.0
    table[(0, 2)] = table[(2, 0)] = 0.5
    with pytest.raises(PhysicalityError):
        state_from_moments(MomentSet(1, table))


def test_moment_set_hermiticity():
    table = {k: 0.0 for k in moment_keys(1)}
    table[(0, 0)] = 1.0
    table[(0, 1)] = 1.0 + 1.0j
    table[(1, 0)] = 1.0 + 1.0j
    with pytest.raises(StructuralError):
        MomentSet(1, table)


@settings(max_examples=60, deadline=None)
@given(physical_states())
def test_moment_round_trip(state):
    back = state_from_moments(moments_from_state(state))
    assert np.allclose(back.mean, state.mean, atol=1e-12)
    assert np.allclose(back.cov, state.cov, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(physical_states(mode_count=2), st.floats(0, 1.5), st.floats(0, 3), st.floats(0.01, 0.99))
def test_composition(state, r, gamma, tau):
    c1 = embed(comp.squeezer_channel(comp.SqueezerSpec(r, gamma)), 1, 2)
    c2 = comp.coupler_channel(comp.CouplerSpec.from_tau(tau))
    lhs = apply_channel(apply_channel(state, c1), c2)
    rhs = apply_channel(state, compose(c2, c1))
    assert np.allclose(lhs.cov, rhs.cov, atol=1e-12)
    assert np.allclose(lhs.mean, rhs.mean, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.floats(0, 2), st.floats(0, 3), st.floats(0, 2), st.floats(0, 3), st.floats(0.01, 0.99), st.floats(0, 6.3))
def test_lossless_chains_keep_vacuum_spectrum(r1, g1, r2, g2, tau, theta):
    s = GaussianState.vacuum(2)
    s = apply_channel(s, direct_sum(comp.squeezer_channel(comp.SqueezerSpec(r1, g1)), comp.squeezer_channel(comp.SqueezerSpec(r2, g2))))
    s = apply_channel(s, comp.hybrid_ring_channel())
    s = apply_channel(s, comp.coupler_channel(comp.CouplerSpec.from_tau(tau)))
    s = apply_channel(s, embed(comp.rotation_channel(theta), 1, 2))
    assert np.allclose(symplectic_eigenvalues(s), 0.25, atol=1e-9)
