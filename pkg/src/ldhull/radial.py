"""Radial minimum of the rate function and radial maximum of the cumulant.

For a rate function ``I`` and cumulant ``K``::

    ibar(r) = min over unit l of I(r l)
    kbar(p) = max over unit l of K(p l)

Directions attaining the extremum are reported for every radius. Above the
mean radius, the convex minorant of ``ibar`` is the one-sided conjugate
of ``kbar``, which gives an independent route to it.

Extremal directions come from a 720-angle scan followed by golden-section
refinement of each local extremum. When more than 90% of the scan ties
with the best value, the direction set is flagged as the full circle.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import lft
from .dist import DistributionModel
from .errors import Unbounded

__all__ = [
    "RadialProfile",
    "ConvexityReport",
    "Kink",
    "radial_min_profile",
    "radial_max_profile",
    "radial_max",
    "conv_radial_min",
    "conv_radial_min_many",
    "one_sided_derivatives_barK",
    "find_barK_kinks",
    "detect_jumps_and_convexity",
    "gaussian_hyperbola_residual",
    "hyperbola_params",
]

N_ANGLES = 720
TIE_RTOL = 1e-9
MERGE_RADIUS = 1e-6
FULL_CIRCLE_SHARE = 0.9
GOLDEN_ITERS = 48
MAX_REFINED = 16
JUMP_GAP = 0.01
JUMP_SCREEN_ROUNDS = 5
JUMP_LOCATE_ROUNDS = 60
CONVEXITY_MARGIN = 1e-8

_INVPHI = (np.sqrt(5.0) - 1.0) / 2.0


def _unit(theta):
    theta = np.asarray(theta, dtype=float)
    return np.stack([np.cos(theta), np.sin(theta)], axis=-1)


def _merge_angles(angles):
    """Cluster angles on the circle within MERGE_RADIUS; sorted, near [0, 2pi)."""
    if len(angles) == 0:
        return np.empty(0)
    a = np.mod(angles, 2 * np.pi)
    a = np.sort(np.where(a > 2 * np.pi - MERGE_RADIUS, a - 2 * np.pi, a))
    out = [a[0]]
    for x in a[1:]:
        if x - out[-1] > MERGE_RADIUS:
            out.append(x)
    if len(out) > 1 and out[0] + 2 * np.pi - out[-1] <= MERGE_RADIUS:
        out.pop()
    return np.array(out)


def _angular_minimize(func, radii, n_angles=N_ANGLES):
    """Minimize ``func(r * unit(theta))`` over theta for each radius.

    ``func`` maps points ``(m, 2)`` to values ``(m,)`` (``+inf`` allowed).
    Returns ``(values, angle_sets, full_circle)``.
    """
    radii = np.asarray(radii, dtype=float)
    theta = np.arange(n_angles) * (2 * np.pi / n_angles)
    step = theta[1]
    pts = radii[:, None, None] * _unit(theta)[None]
    w = func(pts.reshape(-1, 2)).reshape(len(radii), n_angles)
    best = np.min(w, axis=1)
    values = best.copy()
    full = np.zeros(len(radii), bool)
    sets = [np.empty(0) for _ in radii]

    lo_list, row_list = [], []
    for i in range(len(radii)):
        if not np.isfinite(best[i]):
            continue
        tol = TIE_RTOL * (1.0 + abs(best[i]))
        if np.count_nonzero(w[i] <= best[i] + tol) > FULL_CIRCLE_SHARE * n_angles:
            full[i] = True
            continue
        row = w[i]
        left, right = np.roll(row, 1), np.roll(row, -1)
        cand = np.flatnonzero(np.isfinite(row) & (row <= left) & (row < right))
        if cand.size == 0:
            cand = np.array([int(np.argmin(row))])
        cand = cand[np.argsort(row[cand])][:MAX_REFINED]
        lo_list.append(theta[cand] - step)
        row_list.append(np.full(cand.size, i))
    if lo_list:
        lo = np.concatenate(lo_list)
        rows = np.concatenate(row_list)
        hi = lo + 2 * step
        r_of = radii[rows]

        def ev(th):
            return func(r_of[:, None] * _unit(th))

        x1 = hi - _INVPHI * (hi - lo)
        x2 = lo + _INVPHI * (hi - lo)
        f1, f2 = ev(x1), ev(x2)
        for _ in range(GOLDEN_ITERS):
            left_better = f1 <= f2
            hi = np.where(left_better, x2, hi)
            lo = np.where(left_better, lo, x1)
            x2n = np.where(left_better, x1, lo + _INVPHI * (hi - lo))
            x1n = np.where(left_better, hi - _INVPHI * (hi - lo), x2)
            new_x = np.where(left_better, x1n, x2n)
            f_new = ev(new_x)
            f1, f2 = np.where(left_better, f_new, f2), np.where(left_better, f1, f_new)
            x1, x2 = x1n, x2n
        ang = 0.5 * (lo + hi)
        val = ev(ang)
        for i in np.unique(rows):
            sel = rows == i
            v_i, a_i = val[sel], ang[sel]
            b = min(np.min(v_i), best[i])
            values[i] = b
            tol = TIE_RTOL * (1.0 + abs(b))
            keep = a_i[v_i <= b + tol]
            if keep.size == 0:
                keep = theta[[int(np.argmin(w[i]))]]
            sets[i] = _merge_angles(keep)
    return values, sets, full


@dataclass
class RadialProfile:
    """A radial function on a grid with its extremal direction sets.

    ``directions[i]`` holds angles in radians; it is empty when
    ``full_circle[i]`` is set (every direction is extremal) or when the
    value is infinite.
    """

    grid: np.ndarray
    values: np.ndarray
    directions: list
    full_circle: np.ndarray
    kind: str  # "radial-min-of-I" or "radial-max-of-K"
    mean_radius: float
    r_min: Optional[float] = None
    r_max: Optional[float] = None
    evaluate: Optional[Callable] = field(default=None, repr=False, compare=False)

    def direction_vectors(self, i):
        return _unit(self.directions[i])

    def n_directions(self, i):
        return 0 if self.full_circle[i] else len(self.directions[i])

    def finite_span(self):
        fin = self.grid[np.isfinite(self.values)]
        return (float(fin[0]), float(fin[-1])) if fin.size else (np.nan, np.nan)


def _meta(obj):
    if isinstance(obj, DistributionModel):
        m = obj.support_metadata()
        return m.mean_radius, m.r_min, m.r_max
    oracle = lft.as_oracle(obj)
    return float(np.hypot(*oracle.gradient(np.zeros(2)))), None, None


def _rate_values(obj):
    def f(points):
        return lft.rate_batch(obj, points)[0]
    return f


def _ibar_eval(obj):
    """Evaluator ``radii -> (values, angle_sets, full)`` for the radial minimum."""
    st = lft.affine_structure(obj)
    rate_f = _rate_values(obj)

    if st.rank == 2:
        return lambda radii: _angular_minimize(rate_f, radii)

    def on_affine_set(radii):
        radii = np.asarray(radii, dtype=float)
        values = np.full(len(radii), np.inf)
        sets = [np.empty(0) for _ in radii]
        full = np.zeros(len(radii), bool)
        c = st.center
        for i, r in enumerate(radii):
            if st.rank == 0:
                pts = c[None] if abs(np.hypot(*c) - r) <= 1e-12 * (1 + r) else np.empty((0, 2))
            else:
                e = st.basis[:, 0]
                b = c @ e
                disc = b * b - (c @ c - r * r)
                if disc < 0:
                    continue
                ts = np.unique([-b - np.sqrt(disc), -b + np.sqrt(disc)])
                pts = c + ts[:, None] * e
            if r == 0.0 and len(pts):
                # every direction points at the origin
                v = float(rate_f(np.zeros((1, 2)))[0])
                values[i] = v
                full[i] = np.isfinite(v)
                continue
            if len(pts) == 0:
                continue
            vals = rate_f(pts)
            b_val = np.min(vals)
            if not np.isfinite(b_val):
                continue
            values[i] = b_val
            tol = TIE_RTOL * (1.0 + abs(b_val))
            sel = pts[vals <= b_val + tol]
            sets[i] = _merge_angles(np.arctan2(sel[:, 1], sel[:, 0]))
        return values, sets, full

    return on_affine_set


def radial_min_profile(obj, r_grid) -> RadialProfile:
    """Tabulate ``ibar`` with its minimizing directions."""
    grid = np.asarray(r_grid, dtype=float)
    if grid.ndim != 1 or np.any(grid < 0):
        raise ValueError("radii must be a 1-d array of nonnegative numbers")
    evaluate = _ibar_eval(obj)
    values, sets, full = evaluate(grid)
    mean_r, r_min, r_max = _meta(obj)
    return RadialProfile(grid, values, sets, full, "radial-min-of-I", mean_r, r_min, r_max,
                         evaluate)


def _kbar_eval(obj):
    oracle = lft.as_oracle(obj)

    def evaluate(radii):
        radii = np.asarray(radii, dtype=float)
        values, sets, full = _angular_minimize(lambda pts: -oracle.value(pts), radii)
        return -values, sets, full

    return evaluate


def radial_max_profile(obj, p_grid) -> RadialProfile:
    """Tabulate ``kbar`` with its maximizing directions."""
    grid = np.asarray(p_grid, dtype=float)
    if grid.ndim != 1 or np.any(grid < 0):
        raise ValueError("radii must be a 1-d array of nonnegative numbers")
    evaluate = _kbar_eval(obj)
    values, sets, full = evaluate(grid)
    mean_r, r_min, r_max = _meta(obj)
    return RadialProfile(grid, values, sets, full, "radial-max-of-K", mean_r, r_min, r_max,
                         evaluate)


def radial_max(obj, p):
    """``(kbar(p), maximizing angles, full_circle)`` at a single radius."""
    values, sets, full = _kbar_eval(obj)(np.array([float(p)]))
    return float(values[0]), sets[0], bool(full[0])


def _gradient_norms(oracle, p, angles):
    g = oracle.gradient(p * _unit(angles))
    return np.hypot(g[..., 0], g[..., 1])


def one_sided_derivatives_barK(obj, p):
    """Left and right derivatives of ``kbar`` at ``p`` from gradient norms.

    They are the minimum and maximum of ``|grad K(p l)|`` over the
    maximizing directions ``l``.
    """
    oracle = lft.as_oracle(obj)
    p = float(p)
    if p < 0:
        raise ValueError("p must be nonnegative")
    if p == 0.0:
        m = float(np.hypot(*oracle.gradient(np.zeros(2))))
        return m, m
    _, angles, full = radial_max(oracle, p)
    if full:
        angles = np.arange(N_ANGLES) * (2 * np.pi / N_ANGLES)
    norms = _gradient_norms(oracle, p, angles)
    return float(np.min(norms)), float(np.max(norms))


def _kbar_right_slope(oracle):
    return lambda p: one_sided_derivatives_barK(oracle, p)[1]


def conv_radial_min(obj, r):
    """Convex minorant of ``ibar`` at ``r >= |mean|`` via the conjugate of ``kbar``.

    Raises Unbounded when ``r`` exceeds every slope of ``kbar`` (outside
    the closure of the support radius range).
    """
    oracle = lft.as_oracle(obj)
    mean_r = float(np.hypot(*oracle.gradient(np.zeros(2))))
    r = float(r)
    if r < mean_r - 1e-12 * (1.0 + mean_r):
        raise ValueError(f"r={r} is below the mean radius {mean_r}")
    value, _ = lft.conjugate_1d(lambda p: radial_max(oracle, p)[0], r,
                                derivative=_kbar_right_slope(oracle))
    return value


def conv_radial_min_many(obj, r_grid, ibar_values=None):
    """Convex minorant of ``ibar`` on a grid, ``+inf`` where unbounded.

    Below the mean radius ``ibar`` is already convex, so its own values are
    used there when given.
    """
    oracle = lft.as_oracle(obj)
    mean_r = float(np.hypot(*oracle.gradient(np.zeros(2))))
    out = np.empty(len(r_grid))
    for i, r in enumerate(np.asarray(r_grid, dtype=float)):
        if r < mean_r:
            out[i] = ibar_values[i] if ibar_values is not None else np.nan
            continue
        try:
            out[i] = conv_radial_min(oracle, r)
        except Unbounded:
            out[i] = np.inf
    return out


@dataclass(frozen=True)
class Kink:
    p: float
    left: float
    right: float
    angles: np.ndarray


def _nearest_branch(angles, ref):
    d = np.abs(np.angle(np.exp(1j * (np.asarray(angles)[:, None] - np.asarray(ref)[None]))))
    return np.min(d, axis=0)


def _local_argmax(oracle, p, angle, width=0.05):
    """Golden-section refinement of a local maximum of K(p l) near ``angle``."""
    lo, hi = angle - width, angle + width
    f = lambda th: float(oracle.value(p * _unit(th)))  # noqa: E731
    x1, x2 = hi - _INVPHI * (hi - lo), lo + _INVPHI * (hi - lo)
    f1, f2 = f(x1), f(x2)
    for _ in range(60):
        if f1 >= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _INVPHI * (hi - lo)
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _INVPHI * (hi - lo)
            f2 = f(x2)
    return 0.5 * (lo + hi)


def find_barK_kinks(obj, p_grid, angle_jump=1e-3):
    """Locate radii where the maximizing direction of K switches branch.

    Between consecutive grid radii whose maximizers are far apart, bisect
    until the switch is pinned down, then read the one-sided derivatives
    from the two competing branches.
    """
    oracle = lft.as_oracle(obj)
    prof = radial_max_profile(oracle, p_grid)
    kinks = []
    for i in range(len(prof.grid) - 1):
        a_dirs, b_dirs = prof.directions[i], prof.directions[i + 1]
        if prof.full_circle[i] or prof.full_circle[i + 1] or not len(a_dirs) or not len(b_dirs):
            continue
        if len(a_dirs) != 1 or len(b_dirs) != 1:
            continue
        gap = _nearest_branch(a_dirs, b_dirs)[0]
        if gap <= angle_jump * max(1.0, prof.grid[i + 1] - prof.grid[i]) * 50:
            continue
        lo, hi = prof.grid[i], prof.grid[i + 1]
        th_lo, th_hi = a_dirs[0], b_dirs[0]
        for _ in range(JUMP_LOCATE_ROUNDS):
            mid = 0.5 * (lo + hi)
            if mid in (lo, hi):
                break
            t_lo = _local_argmax(oracle, mid, th_lo)
            t_hi = _local_argmax(oracle, mid, th_hi)
            k_lo = oracle.value(mid * _unit(t_lo))
            k_hi = oracle.value(mid * _unit(t_hi))
            if k_lo >= k_hi:
                lo, th_lo = mid, t_lo
            else:
                hi, th_hi = mid, t_hi
        p_star = 0.5 * (lo + hi)
        t1 = _local_argmax(oracle, p_star, th_lo)
        t2 = _local_argmax(oracle, p_star, th_hi)
        if _nearest_branch([t1], [t2])[0] < MERGE_RADIUS:
            continue  # the branches merged: a smooth rotation, not a kink
        n1, n2 = _gradient_norms(oracle, p_star, np.array([t1, t2]))
        kinks.append(Kink(float(p_star), float(min(n1, n2)), float(max(n1, n2)),
                          _merge_angles(np.array([t1, t2]))))
    return kinks


@dataclass(frozen=True)
class ConvexityReport:
    is_convex_on_grid: bool
    violation_nodes: list
    jump_candidates: list  # (radius, left value, right value)
    unique_min_direction_below_mean: bool

    def to_dict(self):
        return {
            "is_convex_on_grid": self.is_convex_on_grid,
            "violation_nodes": [float(r) for r in self.violation_nodes],
            "jumps": [{"r": r, "left": a, "right": b} for r, a, b in self.jump_candidates],
            "unique_min_direction_below_mean": self.unique_min_direction_below_mean,
        }


def _locate_jump(evaluate, a, b, fa, fb):
    """Bisect ``[a, b]`` keeping the half with the larger gap.

    Returns ``(r, left, right)`` if a gap above JUMP_GAP survives both the
    screening rounds and the full localization, else None.
    """
    for k in range(JUMP_LOCATE_ROUNDS):
        m = 0.5 * (a + b)
        if m in (a, b):
            break
        fm = float(evaluate(np.array([m]))[0][0])
        if not np.isfinite(fm):
            return None
        if abs(fm - fa) >= abs(fb - fm):
            b, fb = m, fm
        else:
            a, fa = m, fm
        if k + 1 == JUMP_SCREEN_ROUNDS and abs(fb - fa) <= JUMP_GAP:
            return None
    if abs(fb - fa) <= JUMP_GAP:
        return None
    return 0.5 * (a + b), fa, fb


def detect_jumps_and_convexity(profile: RadialProfile) -> ConvexityReport:
    """Grid convexity above the mean radius, jump search, and uniqueness of
    the minimizing direction below the mean radius."""
    if profile.kind != "radial-min-of-I":
        raise ValueError("convexity diagnostics apply to radial-min-of-I profiles")
    r, v = profile.grid, profile.values
    mean_r = profile.mean_radius
    upper = profile.r_max if profile.r_max is not None else np.inf

    sel = np.flatnonzero((r >= mean_r - 1e-12) & (r < upper) & np.isfinite(v))
    violations = []
    for j in range(1, len(sel) - 1):
        i0, i1, i2 = sel[j - 1], sel[j], sel[j + 1]
        lam = (r[i1] - r[i0]) / (r[i2] - r[i0])
        chord = (1 - lam) * v[i0] + lam * v[i2]
        if v[i1] > chord + CONVEXITY_MARGIN:
            violations.append(float(r[i1]))

    jumps = []
    if profile.evaluate is not None:
        for i in range(len(r) - 1):
            if not (np.isfinite(v[i]) and np.isfinite(v[i + 1])):
                continue
            if abs(v[i + 1] - v[i]) <= JUMP_GAP:
                continue
            found = _locate_jump(profile.evaluate, r[i], r[i + 1], v[i], v[i + 1])
            if found is not None:
                jumps.append(tuple(float(x) for x in found))

    lo = profile.r_min if profile.r_min is not None else 0.0
    unique = True
    for i, ri in enumerate(r):
        if lo < ri <= mean_r + 1e-12 and ri > 0 and np.isfinite(v[i]):
            if profile.full_circle[i] or len(profile.directions[i]) != 1:
                unique = False
    return ConvexityReport(not violations, violations, jumps, unique)


def gaussian_hyperbola_residual(a, b, x0, y0, point):
    """``(a-b) x y - a x0 y + b y0 x`` at ``point``; zero on the curve that
    carries the maximizing directions of an anisotropic Gaussian cumulant."""
    if not a > b > 0:
        raise ValueError("need a > b > 0")
    if x0 < 0 or y0 < 0 or x0 + y0 <= 0:
        raise ValueError("need x0, y0 >= 0 with x0 + y0 > 0")
    x, y = np.asarray(point, dtype=float)[..., 0], np.asarray(point, dtype=float)[..., 1]
    return (a - b) * x * y - a * x0 * y + b * y0 * x


def hyperbola_params(mean, cov):
    """``(a, b, x0, y0)`` for a Gaussian with diagonal covariance.

    ``cov = diag(2a, 2b)`` and ``mean = -(2a x0, 2b y0)``.
    """
    cov = np.asarray(cov, dtype=float)
    if abs(cov[0, 1]) > 0 or abs(cov[1, 0]) > 0:
        raise ValueError("covariance must be diagonal")
    a, b = 0.5 * cov[0, 0], 0.5 * cov[1, 1]
    return a, b, -mean[0] / (2 * a), -mean[1] / (2 * b)
