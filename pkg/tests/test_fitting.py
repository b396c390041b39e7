import math
from dataclasses import replace

import numpy as np
import pytest

from cvrsp import components as comp
from cvrsp.exceptions import StructuralError
from cvrsp.fitting import (
    FitResult,
    SweepGrid,
    direct_contour,
    fit_model,
    fit_objective,
    get_param,
    max_error_contour,
    run_sweep,
    set_params,
    wrap_degrees,
)
from cvrsp.protocol import RspParams, find_optimal_gain, run_rsp, summarize_prepared, reference_params

GAINS = np.linspace(6, 18, 7)
ANGLES = np.linspace(-40, 40, 5)
FREE = ("n", "r", "nf_prime")
SWEEP_RANGE = ((6.0, 18.0), (-40.0, 40.0))


@pytest.fixture(scope="module")
def truth():
    return reference_params()


@pytest.fixture(scope="module")
def observed(truth):
    return run_sweep(truth, GAINS, ANGLES)


@pytest.fixture(scope="module")
def noisy_fit(truth, observed):
    rng = np.random.default_rng(1)
    obs = observed.observables()
    grid = SweepGrid.from_observables(
        GAINS, ANGLES,
        obs["s_db"] + rng.normal(0, 0.1, observed.shape),
        obs["a_db"] + rng.normal(0, 0.1, observed.shape),
        obs["gamma_deg"] + rng.normal(0, 1.0, observed.shape),
    )
    return fit_model(grid, FREE, truth, weights={"s_db": 0.1, "a_db": 0.1, "gamma_deg": 1.0})


def test_identity_single_cell():
    g = run_sweep(RspParams(), [0.0], [0.0])
    cell = g.cells[0][0]
    assert g.shape == (1, 1)
    assert abs(cell.s_rp_db) < 1e-12 and abs(cell.mu - 1) < 1e-12 and cell.degenerate


def test_sweep_cells_match_reference_path(truth):
    g = run_sweep(truth, [7.0, 13.0], [-20.0, 5.0], with_entropy=True)
    for i, gd in enumerate(g.gains_db):
        for j, ad in enumerate(g.angles_deg):
            p = truth.with_feedforward(comp.gain_from_db(gd), math.radians(ad))
            ref = summarize_prepared(run_rsp(p)[0])
            assert math.isclose(g.cells[i][j].s_rp_db, ref.s_rp_db, rel_tol=1e-11, abs_tol=1e-12)
            assert math.isclose(g.cells[i][j].gamma_rp, ref.gamma_rp, abs_tol=1e-11)
            assert g.entropy[i][j].delta >= -1e-9


def test_sweep_validation(truth):
    with pytest.raises(StructuralError):
        run_sweep(truth, [], [0.0])
    with pytest.raises(StructuralError):
        run_sweep(truth, [-1.0], [0.0])


def test_squeezing_is_unimodal_in_gain(truth):
    gains = np.linspace(6, 18, 121)
    s = run_sweep(truth, gains, [0.0]).s_db[:, 0]
    k = int(np.argmax(s))
    assert np.all(np.diff(s[: k + 1]) > 0) and np.all(np.diff(s[k:]) < 0)
    assert 13.0 - 1.5 <= gains[k] <= 14.5 + 1.5


def test_antisqueezing_beyond_optimum(truth):
    # A_rp dips to a minimum about 2 dB past the squeezing optimum, then rises strictly
    gains = np.linspace(6, 18, 121)
    g = run_sweep(truth, gains, [0.0])
    s, a = g.s_db[:, 0], g.a_db[:, 0]
    k_s, k_a = int(np.argmax(s)), int(np.argmin(a))
    assert 0 < gains[k_a] - gains[k_s] < 2.5
    assert np.all(np.diff(a[k_a:]) > 0)


def test_from_observables_round_trip(observed):
    obs = observed.observables()
    rebuilt = SweepGrid.from_observables(GAINS, ANGLES, obs["s_db"], obs["a_db"], obs["gamma_deg"])
    for key, value in rebuilt.observables().items():
        assert np.allclose(value, obs[key], atol=1e-10)
    assert np.allclose(rebuilt.mu, observed.mu, atol=1e-10)


def test_wrap_degrees():
    assert np.allclose(wrap_degrees([0.0, 90.0, -90.0, 179.0, 270.0]), [0.0, 90.0, 90.0, -1.0, 90.0])


def test_objective_wrap_invariance(truth, observed):
    obs = observed.observables()
    shifted = SweepGrid.from_observables(GAINS, ANGLES, obs["s_db"], obs["a_db"], obs["gamma_deg"] + 180.0)
    wrong = set_params(truth, ["r"], [1.1])
    assert math.isclose(fit_objective(wrong, observed), fit_objective(wrong, shifted), rel_tol=1e-9)


def test_noiseless_recovery(truth, observed):
    start = set_params(truth, FREE, [0.06, 1.1, 0.008])
    fit = fit_model(observed, FREE, start)
    for name in FREE:
        assert abs(fit.values[name] / get_param(truth, name) - 1) < 0.02
    assert all(v < 1e-6 for v in fit.residual_rms.values())
    assert fit.objective <= fit.initial_objective
    assert fit.converged


def test_empty_free_list_echoes(truth, observed):
    start = set_params(truth, ["r"], [1.1])
    fit = fit_model(observed, [], start)
    assert fit.params == start and fit.free_names == ()
    assert fit.residual_rms["s_db"] > 0


def test_budget_exhaustion_returns_best(truth, observed):
    start = set_params(truth, FREE, [0.06, 1.1, 0.008])
    fit = fit_model(observed, FREE, start, max_evaluations=5)
    assert not fit.converged
    assert fit.objective <= fit.initial_objective


def test_intervals_unavailable_without_dof(truth):
    one = run_sweep(truth, [13.0], [0.0])
    fit = fit_model(one, FREE, truth)
    assert fit.confidence_95 is None and not fit.intervals_available


def test_fit_input_validation(truth, observed):
    with pytest.raises(StructuralError):
        fit_model(observed, ["bogus"], truth)
    with pytest.raises(StructuralError):
        fit_model(observed, ["r"], truth, bounds={"r": (1.5, 2.0)})


def test_noisy_fit_intervals_cover(truth, noisy_fit):
    assert noisy_fit.intervals_available
    for name in FREE:
        lo, hi = noisy_fit.confidence_95[name]
        assert lo <= get_param(truth, name) <= hi


def test_zero_resource_contour_is_degenerate():
    c = direct_contour(RspParams(), (0.0, 0.0), (-40.0, 40.0))
    assert c.degenerate and c.area == 0.0
    assert np.allclose(c.polygon, [[0.0, 0.0]], atol=1e-12)


def test_direct_contour_resolution(truth):
    a = direct_contour(truth, *SWEEP_RANGE, samples=100)
    b = direct_contour(truth, *SWEEP_RANGE, samples=400)
    assert abs(a.area - b.area) / b.area < 0.01


def test_direct_contour_contains_model_optimum(truth):
    c = direct_contour(truth, *SWEEP_RANGE)
    g = find_optimal_gain(truth)
    s = summarize_prepared(run_rsp(truth.with_feedforward(g))[0])
    assert c.contains((s.gamma_rp_deg, s.s_rp_db))


def test_direct_contour_vertices_are_realizable(truth):
    c = direct_contour(truth, *SWEEP_RANGE, samples=60)
    assert np.all(np.isfinite(c.polygon))
    for (gamma, s_db), (g_db, a_deg) in zip(c.polygon, c.sources):
        assert 6.0 <= g_db <= 18.0 and -40.0 <= a_deg <= 40.0
        ref = summarize_prepared(run_rsp(truth.with_feedforward(comp.gain_from_db(g_db), math.radians(a_deg)))[0])
        assert abs(ref.s_rp_db - s_db) < 1e-9
        assert abs(wrap_degrees(ref.gamma_rp_deg - gamma)) < 1e-9


def _is_simple(poly):
    n = len(poly)

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    for i in range(n):
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue
            p1, p2, q1, q2 = poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n]
            if cross(p1, p2, q1) * cross(p1, p2, q2) < 0 and cross(q1, q2, p1) * cross(q1, q2, p2) < 0:
                return False
    return True


def test_direct_contour_is_simple_ccw(truth):
    c = direct_contour(truth, *SWEEP_RANGE, samples=50)
    assert _is_simple(c.polygon)
    x, y = c.polygon[:, 0], c.polygon[:, 1]
    signed = 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)
    assert math.isclose(signed, c.area, rel_tol=1e-9)


def test_max_error_needs_intervals(truth):
    with pytest.raises(StructuralError, match="fit"):
        max_error_contour(FitResult(truth, FREE, {}, None, 0.0, 0.0), *SWEEP_RANGE, seed=1)


def test_max_error_zero_width_equals_direct(truth):
    fit = FitResult(truth, FREE, {}, {n: (get_param(truth, n),) * 2 for n in FREE}, 0.0, 0.0)
    m = max_error_contour(fit, *SWEEP_RANGE, seed=3, samples=40)
    d = direct_contour(truth, *SWEEP_RANGE, samples=40)
    assert np.array_equal(m.polygon, d.polygon) and m.area == d.area


def test_max_error_contour_properties(noisy_fit):
    d = direct_contour(noisy_fit, *SWEEP_RANGE, samples=60)
    a = max_error_contour(noisy_fit, *SWEEP_RANGE, seed=1, samples=60)
    b = max_error_contour(noisy_fit, *SWEEP_RANGE, seed=2, samples=60)
    assert all(a.contains(v, tol=1e-9) for v in d.polygon)
    assert a.area >= d.area
    assert np.all(np.diff(a.area_history) >= 0)
    assert abs(a.area - b.area) / max(a.area, b.area) < 0.03
    again = max_error_contour(noisy_fit, *SWEEP_RANGE, seed=1, samples=60)
    assert np.array_equal(again.polygon, a.polygon)
