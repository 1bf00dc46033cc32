import math

import numpy as np
import pytest
from scipy import optimize

from ldhull import dist, lft, radial
from conftest import MODELS

ANISO_MEAN = np.array([-1.0, -1.0])
ANISO_COV = np.diag([2.0, 1.0])


def angle_sets_match(a, b, tol):
    """Every angle in ``a`` has a partner in ``b`` and vice versa (mod 2 pi)."""
    def dist_mod(x, y):
        d = abs(x - y) % (2 * np.pi)
        return min(d, 2 * np.pi - d)
    return (all(min(dist_mod(x, y) for y in b) <= tol for x in a)
            and all(min(dist_mod(x, y) for y in a) <= tol for x in b))


def scalar_conjugate(cumulant_1d, x):
    """Independent scalar conjugate by bounded minimization."""
    out = optimize.minimize_scalar(lambda t: cumulant_1d(t) - t * x, bounds=(-60, 60),
                                   method="bounded", options={"xatol": 1e-13})
    return -out.fun


def test_radial_min_fixtures():
    g = dist.Gaussian([1, 0], np.eye(2))
    prof = radial.radial_min_profile(g, [0.5, 1.0])
    assert prof.values[0] == pytest.approx(0.125, abs=1e-12)
    assert prof.values[1] == pytest.approx(0.0, abs=1e-14)
    for i in range(2):
        assert angle_sets_match(prof.directions[i], [0.0], 1e-6)
    prof = radial.radial_min_profile(dist.Gaussian([0, 0], np.diag([2.0, 1.0])), [1.0])
    assert prof.values[0] == pytest.approx(0.25, abs=1e-12)
    assert angle_sets_match(prof.directions[0], [0.0, np.pi], 1e-6)


def test_radial_min_matches_dense_angular_grid():
    g = dist.Gaussian([1, 0.3], [[1.5, 0.2], [0.2, 0.7]])
    th = np.linspace(0, 2 * np.pi, 3600, endpoint=False)
    for r in (0.4, 1.7, 2.5):
        dense = lft.rate_batch(g, r * np.c_[np.cos(th), np.sin(th)])[0].min()
        val = radial.radial_min_profile(g, [r]).values[0]
        assert val <= dense + 1e-12
        assert val == pytest.approx(dense, abs=1e-5)


def test_radial_max_fixtures():
    g = dist.Gaussian([1, 0], np.eye(2))
    val, angles, full = radial.radial_max(g, 1.0)
    assert val == pytest.approx(1.5, abs=1e-12) and not full
    assert angle_sets_match(angles, [0.0], 1e-6)
    assert radial.radial_max(g, 0.0)[0] == 0.0
    val, angles, _ = radial.radial_max(dist.Gaussian([0, 0], np.diag([2.0, 1.0])), 2.0)
    assert val == pytest.approx(4.0, abs=1e-12)
    assert angle_sets_match(angles, [0.0, np.pi], 1e-6)


def test_isotropic_law_gives_full_circle():
    prof = radial.radial_min_profile(dist.Gaussian([0, 0], np.eye(2)), [0.5, 1.0])
    assert np.all(prof.full_circle)
    assert prof.n_directions(0) == 0
    np.testing.assert_allclose(prof.values, [0.125, 0.5], atol=1e-12)


def test_one_sided_derivative_fixtures():
    g = dist.Gaussian([1, 0], np.eye(2))
    assert radial.one_sided_derivatives_barK(g, 1.0) == pytest.approx((2.0, 2.0), abs=1e-9)
    iso = dist.Gaussian([0, 0], np.eye(2))
    for p in (0.3, 1.0, 2.5):
        assert radial.one_sided_derivatives_barK(iso, p) == pytest.approx((p, p), abs=1e-9)
    assert radial.one_sided_derivatives_barK(g, 0.0) == pytest.approx((1.0, 1.0))


def test_one_sided_derivatives_match_finite_differences():
    g = dist.Gaussian(ANISO_MEAN, ANISO_COV)
    kbar = lambda p: radial.radial_max(g, p)[0]  # noqa: E731
    h = 1e-6
    for p in (0.3, 0.8, 1.5, 2.5):
        left, right = radial.one_sided_derivatives_barK(g, p)
        assert left == pytest.approx((kbar(p) - kbar(p - h)) / h, abs=1e-4)
        assert right == pytest.approx((kbar(p + h) - kbar(p)) / h, abs=1e-4)


def test_conv_radial_min_fixtures():
    g = dist.Gaussian([1, 0], np.eye(2))
    assert radial.conv_radial_min(g, 1.5) == pytest.approx(0.125, abs=1e-9)
    assert radial.conv_radial_min(g, 1.0) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        radial.conv_radial_min(g, 0.5)


@pytest.mark.parametrize("name", ["gaussian", "gaussian-aniso", "disk", "circle-shifted",
                                  "rotinv-gauss-mapped"])
def test_conjugate_of_radial_max_equals_envelope(name):
    m = MODELS[name]
    meta = m.support_metadata()
    mu = meta.mean_radius
    grid = np.linspace(mu, mu + 3, 50)
    prof = radial.radial_min_profile(m, grid)
    env = lft.lower_convex_envelope(grid, prof.values)
    conv = radial.conv_radial_min_many(m, grid, prof.values)
    fin = np.isfinite(prof.values)
    # where the profile is finite the two routes agree; beyond r_max both are infinite
    assert np.max(np.abs(conv[fin] - env(grid[fin]))) < 1e-5
    assert np.all(~np.isfinite(conv[~fin]) | (grid[~fin] >= meta.r_max - 1e-9))


def test_rate_on_closure_of_derivative_image_is_convex_hull_value():
    for m in (dist.skewed_three_atom_line(), dist.Gaussian(ANISO_MEAN, ANISO_COV)):
        mu = m.support_metadata().mean_radius
        for p in np.linspace(0.2, 2.0, 10):
            left, right = radial.one_sided_derivatives_barK(m, p)
            for r in {left, right}:
                if r <= mu:
                    continue
                ibar = radial.radial_min_profile(m, [r]).values[0]
                assert ibar == pytest.approx(radial.conv_radial_min(m, r), abs=1e-6)


def test_min_and_max_direction_sets_coincide_at_matched_radii():
    g = dist.Gaussian(ANISO_MEAN, ANISO_COV)
    for p in np.linspace(0.1, 3.0, 20):
        left, right = radial.one_sided_derivatives_barK(g, p)
        assert right - left < 1e-9
        _, max_angles, _ = radial.radial_max(g, p)
        prof = radial.radial_min_profile(g, [right])
        assert angle_sets_match(prof.directions[0], max_angles, 1e-5)


def test_hyperbola_residual_fixtures():
    assert radial.gaussian_hyperbola_residual(1, 0.5, 0.5, 1, [1.0, -1.0]) == pytest.approx(0.5)
    assert radial.gaussian_hyperbola_residual(1, 0.5, 0.5, 1, [0.0, 0.0]) == 0.0
    assert radial.hyperbola_params(ANISO_MEAN, ANISO_COV) == (1.0, 0.5, 0.5, 1.0)
    with pytest.raises(ValueError):
        radial.gaussian_hyperbola_residual(0.5, 1, 0.5, 1, [0, 0])


def test_maximizing_directions_lie_on_hyperbola():
    g = dist.Gaussian(ANISO_MEAN, ANISO_COV)
    params = radial.hyperbola_params(ANISO_MEAN, ANISO_COV)
    for p in (0.5, 1.0, 2.0):
        _, angles, _ = radial.radial_max(g, p)
        pts = p * np.c_[np.cos(angles), np.sin(angles)]
        assert np.all(np.abs(radial.gaussian_hyperbola_residual(*params, pts)) < 1e-6)


def test_gaussian_profile_is_convex_without_jumps():
    g = dist.Gaussian([1, 0], np.eye(2))
    prof = radial.radial_min_profile(g, np.linspace(0, 3, 61))
    rep = radial.detect_jumps_and_convexity(prof)
    assert rep.is_convex_on_grid and not rep.jump_candidates
    assert rep.unique_min_direction_below_mean
    assert radial.find_barK_kinks(g, np.linspace(0.05, 5, 100)) == []


def test_two_atom_profile_jump():
    m = dist.two_atom_line()
    prof = radial.radial_min_profile(m, np.round(np.arange(0, 2.5001, 0.05), 12))
    rep = radial.detect_jumps_and_convexity(prof)
    (r, left, right), = rep.jump_candidates
    k = lambda t: math.log(0.75 * math.exp(t) + 0.25 * math.exp(-2 * t))  # noqa: E731
    assert r == pytest.approx(1.0, abs=0.01)
    assert left == pytest.approx(-math.log(0.75), abs=1e-4)
    assert right == pytest.approx(scalar_conjugate(k, -1.0), abs=1e-3)
    assert scalar_conjugate(k, -1.0) == pytest.approx(0.38357, abs=1e-5)


def test_centred_three_atom_law_is_not_convex():
    m = dist.skewed_three_atom_line()
    grid = np.round(np.arange(0, 3.0001, 0.05), 12)
    prof = radial.radial_min_profile(m, grid)
    rep = radial.detect_jumps_and_convexity(prof)
    assert not rep.is_convex_on_grid
    env = lft.lower_convex_envelope(grid, prof.values)
    assert np.any(env(grid) < prof.values - 1e-4)
    kinks = radial.find_barK_kinks(m, np.linspace(0.05, 5, 100))
    assert len(kinks) == 1 and kinks[0].left < kinks[0].right - 1e-7
    x = 2.3
    assert radial.conv_radial_min(m, x) < radial.radial_min_profile(m, [x]).values[0] - 1e-4


def test_centred_three_atom_law_jumps_where_the_far_atom_ends():
    # -2 is an extremal atom: just above r = 2 only the +r side remains
    m = dist.skewed_three_atom_line()
    prof = radial.radial_min_profile(m, np.round(np.arange(0, 3.0001, 0.05), 12))
    (r, left, right), = radial.detect_jumps_and_convexity(prof).jump_candidates
    k = lambda t: float(m.cumulant(np.array([t, 0.0])))  # noqa: E731
    assert r == pytest.approx(2.0, abs=0.01)
    assert left == pytest.approx(-math.log(0.35), abs=1e-4)
    assert right == pytest.approx(scalar_conjugate(k, 2.0), abs=1e-3)


def test_kink_exists_iff_profile_not_convex():
    for m, convex in ((dist.Gaussian(ANISO_MEAN, ANISO_COV), True), (dist.skewed_three_atom_line(), False)):
        mu = m.support_metadata().mean_radius
        prof = radial.radial_min_profile(m, np.linspace(mu, mu + 2.5, 60))
        rep = radial.detect_jumps_and_convexity(prof)
        kinks = radial.find_barK_kinks(m, np.linspace(0.05, 5, 100))
        assert rep.is_convex_on_grid is convex
        assert (not kinks) is convex


@pytest.mark.parametrize("name, span", [
    ("atoms-two-point", (0.0, 2.0)),
    ("circle-shifted", (2.0, 4.0)),
    ("line-atoms", (0.0, 3.0)),
])
def test_finite_span_matches_support_radii(name, span):
    m = MODELS[name]
    step = 0.05
    grid = np.round(np.arange(0, 5.0001, step), 12)
    lo, hi = radial.radial_min_profile(m, grid).finite_span()
    meta = m.support_metadata()
    assert meta.r_min == pytest.approx(span[0], abs=1e-9)
    assert meta.r_max == pytest.approx(span[1], abs=1e-9)
    assert abs(lo - meta.r_min) <= step + 1e-9 and abs(hi - meta.r_max) <= step + 1e-9


@pytest.mark.parametrize("name", ["gaussian", "gaussian-aniso", "atoms-triangle", "disk",
                                  "circle-shifted", "mixture"])
def test_profile_monotonicity(name):
    m = MODELS[name]
    meta = m.support_metadata()
    kmax = radial.radial_max_profile(m, np.linspace(0, 3, 31))
    assert np.all(np.diff(kmax.values) >= -1e-12)
    hi = min(meta.r_max, meta.mean_radius + 3)
    below = np.linspace(meta.r_min, meta.mean_radius, 12)[1:-1]
    above = np.linspace(meta.mean_radius, hi, 14)[1:-1]
    assert np.all(np.diff(radial.radial_min_profile(m, below).values) < 0)
    assert np.all(np.diff(radial.radial_min_profile(m, above).values) > 0)


def test_one_dimensional_radial_min_is_min_of_axis_rates():
    m = dist.skewed_three_atom_line()
    xs = np.linspace(0.1, 1.95, 15)
    prof = radial.radial_min_profile(m, xs)
    plus = lft.rate_batch(m, np.c_[xs, 0 * xs])[0]
    minus = lft.rate_batch(m, np.c_[-xs, 0 * xs])[0]
    np.testing.assert_allclose(prof.values, np.minimum(plus, minus), atol=1e-8, rtol=0)


def test_generic_oracle_profile():
    # F(u) = |u|^4 / 4 + u_x: a non-cumulant convex function
    f = lft.ConvexOracle(lambda u: np.sum(u**2, -1) ** 2 / 4 + u[..., 0],
                         lambda u: np.sum(u**2, -1)[..., None] * u + np.array([1.0, 0.0]))
    prof = radial.radial_min_profile(f, [0.5, 2.0])
    # the conjugate is (3/4)|v - (1,0)|^(4/3), smallest along the x-axis
    np.testing.assert_allclose(prof.values, 0.75 * np.array([0.5, 1.0]) ** (4 / 3), atol=1e-9)
