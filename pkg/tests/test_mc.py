import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ldhull import dist, geom, lft, mc, radial
from ldhull.errors import DegenerateWeights, InsufficientCells

GAUSS = dist.Gaussian([1.0, 0.0], np.eye(2))
ISO = dist.Gaussian([0.0, 0.0], np.eye(2))


def arc_path(n, a, alpha=0.0, sigma=1):
    r = math.sqrt(2 * a / math.pi)
    k = np.arange(1, n + 1)
    ang = sigma * np.pi * k / n + alpha
    return n * r * np.c_[np.cos(ang) - np.cos(alpha), np.sin(ang) - np.sin(alpha)]


def test_point_mass_walk():
    m = dist.DiscreteAtoms([[1, 0]], [1.0])
    path = mc.simulate_walk(m, 5, seed=3)
    np.testing.assert_array_equal(path.partial_sums[-1], [5.0, 0.0])
    assert mc.hull_functionals(path) == (10.0, 0.0)


def test_walk_replay_is_bit_identical():
    a = mc.simulate_walk(dist.two_atom_line(), 200, seed=11)
    b = mc.simulate_walk(dist.two_atom_line(), 200, seed=11)
    np.testing.assert_array_equal(a.partial_sums, b.partial_sums)


def test_hull_functionals_include_origin():
    path = np.array([[1.0, 1.0], [2.0, 1.0], [2.0, 2.0]])
    per, ar = mc.hull_functionals(path)
    hull = geom.convex_hull(np.vstack([[0, 0], path]))
    assert per == pytest.approx(geom.perimeter(hull)) and ar == pytest.approx(geom.area(hull))


def test_segment_plan_below_mean():
    (plan,) = mc.tilt_plan_segment(GAUSS, 0.5, "below-mean")
    np.testing.assert_allclose(plan.tilt, [-0.5, 0.0], atol=1e-8)
    assert GAUSS.cumulant(plan.tilt) == pytest.approx(-0.375, abs=1e-10)
    assert plan.tilt @ plan.target - GAUSS.cumulant(plan.tilt) == pytest.approx(0.125, abs=1e-10)
    (zero,) = mc.tilt_plan_segment(GAUSS, 1.0, "below-mean")
    assert np.all(zero.tilt == 0) and zero.rate_value == 0.0
    with pytest.raises(ValueError):
        mc.tilt_plan_segment(GAUSS, 1.5, "below-mean")


def test_segment_plan_full_circle():
    (plan,) = mc.tilt_plan_segment(ISO, 1.0, "above-mean")
    assert plan.rotate and plan.group_average
    assert np.hypot(*plan.tilt) == pytest.approx(1.0, abs=1e-9)


def test_segment_plans_for_two_directions():
    plans = mc.tilt_plan_segment(dist.Gaussian([0, 0], np.diag([2.0, 1.0])), 1.0, "above-mean")
    assert len(plans) == 2
    targets = sorted(p.target[0] for p in plans)
    assert targets == pytest.approx([-1.0, 1.0], abs=1e-6)


def test_arc_plan_speed_and_vanishing_tilts():
    plan = mc.tilt_plan_arc(ISO, 0.05)
    tilts = plan.tilts(64)
    np.testing.assert_allclose(np.hypot(tilts[:, 0], tilts[:, 1]), math.sqrt(2 * math.pi * 0.05),
                               rtol=1e-10)
    assert np.max(np.abs(mc.tilt_plan_arc(ISO, 1e-10).tilts(64))) < 1e-4
    with pytest.raises(ValueError):
        mc.tilt_plan_arc(GAUSS.__class__([0, 0], np.diag([2.0, 1.0])), 0.05)


def test_arc_plan_riemann_sum_of_rates():
    a, n = 0.05, 1000
    plan = mc.tilt_plan_arc(ISO, a)
    u, vel = plan.tilts(n), plan.targets(n)
    total = np.sum(np.einsum("ki,ki->k", u, vel) - ISO.cumulant(u)) / n
    assert total == pytest.approx(math.pi * a, abs=1e-3)


def test_zero_plan_matches_crude_bit_for_bit():
    ev = mc.Event("perimeter-below", 0.8)
    crude = mc.crude_ld_estimate(GAUSS, ev, [20, 40], 3000, seed=4)
    for j, n in enumerate((20, 40)):
        cell = mc.tilted_ld_estimate(GAUSS, ev, mc.zero_plan(), n, 3000, seed=4)
        assert cell.hits == crude.hits[j]
        assert cell.p_hat == crude.p_hat[j]


@pytest.mark.parametrize("model, plans", [
    (GAUSS, lambda: mc.tilt_plan_segment(GAUSS, 0.5, "below-mean")),
    (ISO, lambda: mc.tilt_plan_segment(ISO, 0.5, "above-mean")),
    (ISO, lambda: [mc.tilt_plan_arc(ISO, 0.05)]),
    (ISO, lambda: [mc.tilt_plan_arc(ISO, 0.05, rotate=False)]),
    (dist.Gaussian([0, 0], np.diag([2.0, 1.0])),
     lambda: mc.tilt_plan_segment(dist.Gaussian([0, 0], np.diag([2.0, 1.0])), 1.0, "above-mean")),
])
def test_always_event_is_unbiased(model, plans):
    # short walks: over the whole space the weights have exponentially growing variance
    cell = mc.tilted_ld_estimate(model, mc.Event("always"), plans(), 5, 10_000, seed=5,
                                 check_ess=False)
    assert abs(cell.p_hat - 1.0) <= 3 * cell.std_err


def test_tilted_mean_velocity():
    (plan,) = mc.tilt_plan_segment(GAUSS, 0.5, "below-mean")
    n, trials = 50, 4000
    paths, _ = mc.sample_paths(GAUSS, n, trials, seed=6, plan=plan)
    vel = paths[:, -1] / n
    se = vel.std(axis=0) / math.sqrt(trials)
    assert np.all(np.abs(vel.mean(axis=0) - [0.5, 0.0]) <= 3 * se)


def test_determinism_across_worker_counts():
    plans = mc.tilt_plan_segment(GAUSS, 0.5, "below-mean")
    ev = mc.Event("perimeter-below", 0.5)
    a = mc.tilted_ld_curve(GAUSS, ev, plans, [30, 60], 5000, seed=9)
    b = mc.tilted_ld_estimate(GAUSS, ev, plans, 30, 5000, seed=9, threads=1)
    c = mc.tilted_ld_estimate(GAUSS, ev, plans, 30, 5000, seed=9, threads=4)
    assert a.log_p[0] == b.log_p == c.log_p
    assert b.log_se == c.log_se and b.hits == c.hits
    crude1 = mc.crude_ld_estimate(ISO, ev, [30], 5000, 2, threads=1)
    crude3 = mc.crude_ld_estimate(ISO, ev, [30], 5000, 2, threads=3)
    assert crude1.hits[0] == crude3.hits[0]


def test_synthetic_slopes():
    n = np.array([100, 150, 200, 300, 400])
    exact = mc.LdEstimate.from_probabilities(n, np.exp(-0.125 * n))
    assert mc.rate_slope(exact)[0] == pytest.approx(-0.125, abs=1e-12)
    prefactor = mc.LdEstimate.from_probabilities(n, n * np.exp(-0.125 * n))
    assert mc.rate_slope(prefactor)[0] == pytest.approx(-0.125, abs=0.005)
    with pytest.raises(InsufficientCells):
        mc.fit_rate_slope([100], [-12.5])


def test_weighted_fit_recovers_slope_with_errors():
    rng = np.random.default_rng(3)
    n = np.arange(100, 501, 50)
    se = np.full(n.size, 0.05)
    fit = mc.fit_rate_slope(n, -0.2 * n + 1.0 + rng.normal(0, 0.05, n.size), se)
    assert abs(fit.slope + 0.2) <= 3 * fit.se
    assert fit.ci == pytest.approx(1.96 * fit.se)


def test_zero_rate_at_mean_radius():
    est = mc.crude_ld_estimate(GAUSS, mc.Event("perimeter-below", 1.0), [50, 100, 200], 2000, 1)
    assert np.all(est.p_hat > 0.05)
    assert abs(mc.rate_slope(est)[0]) < 0.005


def test_impossible_event_flags_every_cell():
    est = mc.crude_ld_estimate(dist.two_atom_line(), mc.Event("perimeter-above", 2.5),
                               [10, 20, 30], 2000, 1)
    assert np.all(est.zero_hit) and np.all(est.hits == 0)
    with pytest.raises(InsufficientCells):
        est.fit()
    with pytest.raises(DegenerateWeights):
        mc.tilted_ld_estimate(dist.two_atom_line(), mc.Event("perimeter-above", 2.5),
                              mc.zero_plan(), 10, 1000, 1)


def test_boundary_probability_by_enumeration():
    m = dist.DiscreteAtoms([[1, 0], [0, 1], [-0.3, -0.4]], [0.5, 0.3, 0.2])
    r_max = m.support_metadata().r_max
    assert r_max == pytest.approx(1.0)
    steps, probs = m.points, m.probs
    for n in range(1, 9):
        exact = 0.0
        for seq in itertools.product(range(3), repeat=n):
            path = np.cumsum(steps[list(seq)], axis=0)
            per, _ = geom.hull_perimeter_area(path[None])
            if per[0] >= 2 * r_max * n * (1 - 1e-12):
                exact += math.prod(probs[list(seq)])
        assert mc.boundary_probability(m, n) == pytest.approx(exact, rel=1e-12)
        crude = mc.crude_ld_estimate(m, mc.Event("perimeter-above", r_max), [n], 20_000, seed=n)
        assert abs(crude.p_hat[0] - exact) <= 3 * math.sqrt(exact * (1 - exact) / 20_000) + 1e-12


def test_segment_deviation_examples():
    n, x = 100, 0.5
    k = np.arange(1, n + 1)[:, None]
    straight = k * x * np.array([1.0, 0.0])
    assert mc.shape_deviation_segment(straight, x, [0.0]) == pytest.approx(0.0, abs=1e-15)
    d = 0.01
    bent = k * x * np.array([math.cos(d), math.sin(d)])
    assert mc.shape_deviation_segment(bent, x, [0.0]) == pytest.approx(2 * x * math.sin(d / 2),
                                                                        rel=1e-9)
    assert mc.shape_deviation_segment(bent, x, None, full_circle=True) <= x * np.pi / 720 + 1e-12


def test_arc_deviation_invariances():
    n, a = 400, 0.05
    assert mc.shape_deviation_arc(arc_path(n, a), a) == pytest.approx(0.0, abs=1e-12)
    assert mc.shape_deviation_arc(arc_path(n, a, alpha=1.3), a) == pytest.approx(0.0, abs=1e-3)
    assert mc.shape_deviation_arc(arc_path(n, a, sigma=-1), a) == pytest.approx(0.0, abs=1e-3)
    batch = np.stack([arc_path(n, a), arc_path(n, 2 * a)])
    out = mc.shape_deviation_arc(batch, a)
    assert out[0] < 1e-12 < out[1]


@settings(max_examples=30, deadline=None)
@given(st.floats(0, 2 * np.pi), st.sampled_from([-1, 1]), st.floats(0.01, 0.2))
def test_arc_deviation_is_orientation_free(alpha, sigma, a):
    assert mc.shape_deviation_arc(arc_path(200, a, alpha, sigma), a) <= 1e-3


def test_path_cost_examples():
    n, x = 50, 0.5
    line = geom.Polyline(np.r_[[[0, 0]], np.arange(1, n + 1)[:, None] / n * [x, 0.0]])
    assert mc.path_cost_IC(GAUSS, line) == pytest.approx(
        radial.radial_min_profile(GAUSS, [x]).values[0], abs=1e-12)
    mean_path = geom.Polyline(np.r_[[[0, 0]], np.arange(1, n + 1)[:, None] / n * [1.0, 0.0]])
    assert mc.path_cost_IC(GAUSS, mean_path) == pytest.approx(0.0, abs=1e-14)
    off = geom.Polyline([[0, 0], [0.5, 0.1]])
    assert mc.path_cost_IC(dist.two_atom_line(), off) == math.inf


def test_spitzer_widom_point_mass():
    lhs, rhs, _ = mc.spitzer_widom_check(dist.DiscreteAtoms([[1, 0]], [1.0]), 5, 10, 1)
    assert lhs == 10.0 and rhs == pytest.approx(10.0, abs=1e-12)


def test_spitzer_widom_two_atoms():
    sw = mc.spitzer_widom_check(dist.two_atom_line(), 50, 20_000, 3)
    assert sw.analytic is None
    assert abs(sw.lhs - sw.rhs) <= 3 * sw.diff_se


def test_spitzer_widom_gaussian_small():
    sw = mc.spitzer_widom_check(ISO, 100, 10_000, 2)
    assert sw.analytic == pytest.approx(46.60, abs=0.01)
    assert sw.lhs == pytest.approx(sw.analytic, rel=0.01)
    assert sw.rhs == pytest.approx(sw.analytic, rel=0.01)


def test_weighted_quantiles():
    vals = np.array([3.0, 1.0, 2.0, 4.0])
    assert mc.weighted_quantiles(vals, np.zeros(4), [0.5])[0] == 2.0
    lw = np.log([1.0, 1.0, 1.0, 10.0])
    assert mc.weighted_quantiles(vals, lw, [0.5])[0] == 4.0


def test_tilted_estimate_matches_crude_where_both_work():
    ev = mc.Event("perimeter-below", 0.7)
    plans = mc.tilt_plan_segment(GAUSS, 0.7, "below-mean")
    crude = mc.crude_ld_estimate(GAUSS, ev, [40], 20_000, 8)
    cell = mc.tilted_ld_estimate(GAUSS, ev, plans, 40, 20_000, 8)
    assert abs(cell.p_hat - crude.p_hat[0]) <= 3 * math.hypot(cell.std_err, crude.std_err[0])
