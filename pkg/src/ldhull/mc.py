"""Monte Carlo for large deviations of hull perimeter and area.

Walks are simulated in fixed blocks of trials. Each block draws from its
own generator keyed by ``(seed, n, block)``, so results do not depend on
the number of worker threads. Rare events are estimated by exponential
tilting along the optimal straight-line or half-circle path. The
likelihood ratio ``exp(sum K(u_k) - sum u_k . X_k)`` is kept in the log
domain because probabilities at large ``n`` underflow double precision.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numba as nb
import numpy as np
from scipy import special

from . import geom, lft, radial
from .dist import DistributionModel, Gaussian, RotationallyInvariant
from .errors import DegenerateWeights, InsufficientCells, NoFiniteRate

__all__ = [
    "WalkPath",
    "Event",
    "TiltPlan",
    "TiltedCell",
    "LdEstimate",
    "SlopeFit",
    "SpitzerWidom",
    "simulate_walk",
    "hull_functionals",
    "sample_paths",
    "tilt_plan_segment",
    "tilt_plan_arc",
    "tilted_ld_estimate",
    "tilted_ld_curve",
    "crude_ld_estimate",
    "fit_rate_slope",
    "rate_slope",
    "shape_deviation_segment",
    "shape_deviation_arc",
    "weighted_quantiles",
    "path_cost_IC",
    "spitzer_widom_check",
    "worker_count",
]

BLOCK = 1000
MIN_ESS = 10.0
EVENT_RTOL = 1e-12
SHAPE_SAMPLE = 2000
SHAPE_ANGLES = 720
DEFAULT_N_GRID = (100, 150, 200, 300, 400)


def worker_count():
    env = os.environ.get("LDHULL_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def _block_rng(seed, n, block):
    return np.random.default_rng([int(seed), int(n), int(block)])


def _blocks(trials):
    out, start = [], 0
    while start < trials:
        out.append(min(BLOCK, trials - start))
        start += BLOCK
    return out


def _map_blocks(fn, sizes, threads=None):
    """Apply ``fn(block_index, size)`` to every block; results in block order."""
    threads = threads or worker_count()
    jobs = list(enumerate(sizes))
    if threads == 1 or len(jobs) == 1:
        return [fn(b, s) for b, s in jobs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda job: fn(*job), jobs))


# -- paths -----------------------------------------------------------------

@dataclass(frozen=True)
class WalkPath:
    increments: np.ndarray
    partial_sums: np.ndarray
    seed: Optional[int] = None

    @property
    def n(self):
        return len(self.increments)


def simulate_walk(model, n, seed) -> WalkPath:
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng(int(seed))
    inc = model.sample(rng, (int(n),))
    return WalkPath(inc, np.cumsum(inc, axis=0), int(seed))


def hull_functionals(path):
    """Perimeter and area of the hull of the origin and the partial sums."""
    sums = path.partial_sums if isinstance(path, WalkPath) else np.asarray(path, dtype=float)
    per, ar = geom.hull_perimeter_area(sums[None], with_origin=True)
    return float(per[0]), float(ar[0])


# -- events ----------------------------------------------------------------

@dataclass(frozen=True)
class Event:
    """``perimeter-below``: P <= 2xn; ``perimeter-above``: P >= 2xn;
    ``area-above``: A >= a n^2; ``always``: every trial."""

    kind: str
    level: float = 0.0

    KINDS = ("perimeter-below", "perimeter-above", "area-above", "always")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"event kind must be one of {self.KINDS}")

    def hits(self, per, ar, n):
        if self.kind == "perimeter-below":
            return per <= 2.0 * self.level * n * (1.0 + EVENT_RTOL)
        if self.kind == "perimeter-above":
            return per >= 2.0 * self.level * n * (1.0 - EVENT_RTOL)
        if self.kind == "area-above":
            return ar >= self.level * n * n * (1.0 - EVENT_RTOL)
        return np.ones(per.shape, bool)

    def describe(self):
        return {
            "perimeter-below": "Pn <= 2xn",
            "perimeter-above": "Pn >= 2xn",
            "area-above": "An >= a n^2",
            "always": "always",
        }[self.kind]


# -- tilt plans ------------------------------------------------------------

def _rotation(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True)
class TiltPlan:
    """Exponential change of measure for each step.

    ``tilt`` is a constant 2-vector, or None for an arc plan. Arc plans carry
    ``arc_tilt``: the tilt at velocity ``(speed, 0)``. The tilt for step k
    is that vector rotated to the direction of the arc velocity at k/n. With
    ``rotate`` set, every trial rotates its tilts by an independent uniform
    angle (arcs are also reflected with probability 1/2). With
    ``group_average`` set as well, the likelihood ratio is averaged over
    all rotations and reflections of the plan, which is valid when the
    cumulant is rotation invariant and removes the heavy weight tail caused
    by rotated copies of the optimal path.
    """

    tilt: Optional[np.ndarray] = None
    target: Optional[np.ndarray] = None
    arc_tilt: Optional[np.ndarray] = None
    arc_radius: float = 0.0
    rotate: bool = False
    group_average: bool = False
    rate_value: float = 0.0
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def is_arc(self):
        return self.arc_tilt is not None

    def arc_angles(self, n):
        k = np.arange(1, n + 1)
        return np.pi * k / n + 0.5 * np.pi  # direction of h'(k/n)

    def tilts(self, n):
        """Per-step tilts, shape (n, 2), before any per-trial rotation."""
        if self.is_arc:
            ang = self.arc_angles(n)
            c, s = np.cos(ang), np.sin(ang)
            ux, uy = self.arc_tilt
            return np.stack([c * ux - s * uy, s * ux + c * uy], axis=-1)
        return np.broadcast_to(self.tilt, (n, 2))

    def targets(self, n):
        """Declared tilted mean velocity for each step."""
        if self.is_arc:
            speed = np.pi * self.arc_radius
            return speed * np.stack([np.cos(self.arc_angles(n)), np.sin(self.arc_angles(n))], -1)
        return np.broadcast_to(self.target, (n, 2))

    def log_normalizer(self, model, n):
        """``sum_k K(u_k)`` for the unrotated plan."""
        if self.is_arc:
            return float(math.fsum(model.cumulant(self.tilts(n))))
        return float(n * model.cumulant(self.tilt))

    def verify(self, model, n=16, tol=1e-8):
        """Largest gap between ``grad K(u_k)`` and the declared velocity."""
        gap = model.cumulant_gradient(self.tilts(n)) - self.targets(n)
        err = float(np.max(np.hypot(gap[:, 0], gap[:, 1])))
        if err > tol:
            raise NoFiniteRate(f"tilted mean misses the target by {err:.3g}")
        return err

    def to_dict(self):
        out = {"rotate": self.rotate, "group_average": self.group_average,
               "rate": self.rate_value}
        if self.is_arc:
            out.update(arc_tilt=self.arc_tilt.tolist(), arc_radius=self.arc_radius)
        else:
            out.update(tilt=self.tilt.tolist(), target=self.target.tolist())
        return out


def zero_plan():
    return TiltPlan(np.zeros(2), np.zeros(2))


def _solve_tilt(model, v):
    res = lft.rate(model, v)
    if not res.finite:
        raise NoFiniteRate(f"rate is infinite at velocity {np.asarray(v).tolist()}")
    return res


def tilt_plan_segment(model, x, side):
    """Constant-tilt plans toward the straight paths ``k x l / n``.

    ``side`` is ``below-mean`` (single minimizing direction) or
    ``above-mean`` (one plan per minimizing direction, or a single
    rotating plan when every direction minimizes). Returns a list of plans.
    """
    if side not in ("below-mean", "above-mean"):
        raise ValueError("side must be 'below-mean' or 'above-mean'")
    meta = model.support_metadata()
    x = float(x)
    tol = 1e-12 * (1.0 + meta.mean_radius)
    if side == "below-mean" and not (meta.r_min < x <= meta.mean_radius + tol):
        raise ValueError(f"x={x} outside (r_min, |mean|] = ({meta.r_min}, {meta.mean_radius}]")
    if side == "above-mean" and not (meta.mean_radius - tol <= x < meta.r_max):
        raise ValueError(f"x={x} outside [|mean|, r_max) = [{meta.mean_radius}, {meta.r_max})")
    if abs(x - meta.mean_radius) <= tol:
        return [zero_plan()]
    prof = radial.radial_min_profile(model, [x])
    ibar = float(prof.values[0])
    if not np.isfinite(ibar):
        raise NoFiniteRate(f"radial rate is infinite at x={x}")
    if prof.full_circle[0]:
        res = _solve_tilt(model, np.array([x, 0.0]))
        plan = TiltPlan(res.maximizer, np.array([x, 0.0]), rotate=True,
                        group_average=_is_rotation_invariant(model), rate_value=res.value)
        plan.verify(model)
        return [plan]
    angles = prof.directions[0]
    if side == "below-mean" and len(angles) != 1:
        raise NoFiniteRate(f"expected a unique minimizing direction below the mean, got {len(angles)}")
    plans = []
    for th in angles:
        v = x * np.array([np.cos(th), np.sin(th)])
        res = _solve_tilt(model, v)
        plan = TiltPlan(res.maximizer, v, rate_value=res.value)
        plan.verify(model)
        plans.append(plan)
    return plans


def _is_rotation_invariant(model, tol=1e-10):
    rng = np.random.default_rng(12345)
    u = rng.normal(size=(8, 2))
    th = rng.uniform(0, 2 * np.pi, 8)
    ru = np.einsum("kij,kj->ki", np.stack([_rotation(t) for t in th]), u)
    k0, k1 = model.cumulant(u), model.cumulant(ru)
    return bool(np.all(np.abs(k0 - k1) <= tol * (1.0 + np.abs(k0))))


def tilt_plan_arc(model, a, rotate=True):
    """Time-varying tilt toward the half circle of area ``a`` (per n^2).

    The model must be rotationally invariant; the arc has radius
    ``sqrt(2a/pi)`` and constant speed ``sqrt(2 pi a)``. By default trials
    draw a random orientation and use the orientation-averaged weight.
    """
    if not _is_rotation_invariant(model):
        raise ValueError("arc tilting needs a rotationally invariant increment law")
    if not a > 0:
        raise ValueError("a must be positive")
    speed = math.sqrt(2 * math.pi * a)
    r_max = model.support_metadata().r_max
    if speed >= r_max:
        raise NoFiniteRate(f"arc speed {speed:.6g} is not below r_max={r_max:.6g}")
    res = _solve_tilt(model, np.array([speed, 0.0]))
    plan = TiltPlan(arc_tilt=res.maximizer, arc_radius=math.sqrt(2 * a / math.pi),
                    rotate=rotate, group_average=rotate, rate_value=res.value)
    plan.verify(model)
    return plan


# -- sampling under a plan -------------------------------------------------

def _draw_block(model, n, size, rng, plan):
    """Paths (size, n, 2) and log likelihood ratios (size,)."""
    if plan is None or (not plan.is_arc and not plan.rotate and not np.any(plan.tilt)):
        inc = model.sample(rng, (size, n))
        return np.cumsum(inc, axis=1), np.zeros(size)
    base = plan.tilts(n) if plan.is_arc else plan.tilt[None]
    if plan.rotate:
        th = rng.uniform(0.0, 2 * np.pi, size)
        b = base[:, 0] + 1j * base[:, 1]
        if plan.is_arc:
            flip = rng.random(size) < 0.5
            b = np.where(flip[:, None], np.conj(b)[None], b[None])
        z = b * np.exp(1j * th)[:, None]
        tilts = np.stack([z.real, z.imag], axis=-1)
    else:
        tilts = base[None]
    inc = model.sample(rng, (size, n), tilt=tilts)
    if tilts.shape[1] == 1:
        log_norm = n * model.cumulant(tilts[:, 0])
    else:
        log_norm = np.sum(model.cumulant(tilts), axis=1)
    log_norm = np.broadcast_to(log_norm, (size,))
    if plan.rotate and plan.group_average:
        log_w = log_norm - _log_group_mean_lr(base, inc, plan.is_arc)
    else:
        log_w = log_norm - np.einsum("tki,tki->t", np.broadcast_to(tilts, inc.shape), inc)
    return np.cumsum(inc, axis=1), log_w


def _log_i0(x):
    return np.log(special.ive(0, x)) + x


def _log_group_mean_lr(base, inc, reflect):
    """``log`` of the mean of ``exp(sum_k g(u_k) . X_k)`` over rotations g
    (and reflections when ``reflect``), in closed form via Bessel I0."""
    b = base[:, 0] + 1j * base[:, 1]
    x = inc[..., 0] + 1j * inc[..., 1]
    if b.shape[0] == 1:
        c_plus = np.abs(np.conj(b[0]) * x.sum(axis=1))
    else:
        c_plus = np.abs(x @ np.conj(b))
    if not reflect:
        return _log_i0(c_plus)
    c_minus = np.abs(x @ b)
    return np.logaddexp(_log_i0(c_plus), _log_i0(c_minus)) - math.log(2.0)


def _pick_plan(plans, rng, size):
    if len(plans) == 1:
        return np.zeros(size, dtype=int)
    return rng.integers(0, len(plans), size)


def sample_paths(model, n, trials, seed, plan=None):
    """Partial sums ``(trials, n, 2)`` and log weights under a plan (or list)."""
    plans = plan if isinstance(plan, (list, tuple)) else [plan]
    out_p, out_w = [], []
    for b, size in enumerate(_blocks(trials)):
        p, w = _plan_block(model, n, size, _block_rng(seed, n, b), plans)
        out_p.append(p)
        out_w.append(w)
    return np.concatenate(out_p), np.concatenate(out_w)


def _plan_block(model, n, size, rng, plans):
    if len(plans) == 1:
        return _draw_block(model, n, size, rng, plans[0])
    which = _pick_plan(plans, rng, size)
    paths = np.empty((size, n, 2))
    logw = np.empty(size)
    for j, pl in enumerate(plans):
        sel = np.flatnonzero(which == j)
        if sel.size:
            paths[sel], logw[sel] = _draw_block(model, n, sel.size, rng, pl)
    return paths, logw


# -- shape statistics ------------------------------------------------------

def _as_sums(path):
    if isinstance(path, WalkPath):
        return path.partial_sums
    return np.asarray(path, dtype=float)


def shape_deviation_segment(path, x, dirs=None, full_circle=False):
    """``min over l of max_k |S_k/n - (k/n) x l|`` for each path.

    ``dirs`` holds direction angles; ``full_circle`` minimizes over a
    720-angle grid instead. Accepts one path ``(n, 2)`` or a batch.
    """
    sums = _as_sums(path)
    single = sums.ndim == 2
    if single:
        sums = sums[None]
    n = sums.shape[1]
    if full_circle:
        dirs = np.arange(SHAPE_ANGLES) * (2 * np.pi / SHAPE_ANGLES)
    dirs = np.atleast_1d(np.asarray(dirs, dtype=float))
    if dirs.size == 0:
        raise ValueError("need at least one direction")
    scaled = sums / n
    frac = np.arange(1, n + 1) / n
    best = np.full(len(sums), np.inf)
    for th in dirs:
        line = x * frac[:, None] * np.array([np.cos(th), np.sin(th)])
        d = scaled - line
        dev = np.max(np.hypot(d[..., 0], d[..., 1]), axis=1)
        best = np.minimum(best, dev)
    return float(best[0]) if single else best


@nb.njit(cache=True, nogil=True)
def _arc_dev(px, py, radius, sigma, alpha):
    n = px.shape[0]
    ca, sa = math.cos(alpha), math.sin(alpha)
    worst = 0.0
    for k in range(n):
        ang = sigma * math.pi * (k + 1) / n + alpha
        dx = px[k] - radius * (math.cos(ang) - ca)
        dy = py[k] - radius * (math.sin(ang) - sa)
        d = math.sqrt(dx * dx + dy * dy)
        if d > worst:
            worst = d
    return worst


@nb.njit(cache=True, nogil=True)
def _arc_dev_batch(sums, radius, n_angles):
    t_count, n = sums.shape[0], sums.shape[1]
    out = np.empty(t_count)
    step = 2.0 * math.pi / n_angles
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    px = np.empty(n)
    py = np.empty(n)
    for t in range(t_count):
        for k in range(n):
            px[k] = sums[t, k, 0] / n
            py[k] = sums[t, k, 1] / n
        best = np.inf
        for sgn in (-1.0, 1.0):
            b_val = np.inf
            b_ang = 0.0
            for j in range(n_angles):
                v = _arc_dev(px, py, radius, sgn, j * step)
                if v < b_val:
                    b_val = v
                    b_ang = j * step
            lo = b_ang - step
            hi = b_ang + step
            x1 = hi - invphi * (hi - lo)
            x2 = lo + invphi * (hi - lo)
            f1 = _arc_dev(px, py, radius, sgn, x1)
            f2 = _arc_dev(px, py, radius, sgn, x2)
            for _ in range(40):
                if f1 <= f2:
                    hi = x2
                    x2 = x1
                    f2 = f1
                    x1 = hi - invphi * (hi - lo)
                    f1 = _arc_dev(px, py, radius, sgn, x1)
                else:
                    lo = x1
                    x1 = x2
                    f1 = f2
                    x2 = lo + invphi * (hi - lo)
                    f2 = _arc_dev(px, py, radius, sgn, x2)
            v = min(b_val, f1, f2)
            if v < best:
                best = v
        out[t] = best
    return out


def shape_deviation_arc(path, a):
    """Distance of ``S_k/n`` from the best-fitting half circle of area ``a``.

    Minimizes over the orientation ``sigma`` in {-1, +1} and the start angle
    ``alpha`` (720-angle grid plus golden-section refinement) the largest
    deviation from ``r (cos(sigma pi k/n + alpha) - cos alpha,
    sin(sigma pi k/n + alpha) - sin alpha)`` with ``r = sqrt(2a/pi)``.
    """
    if not a > 0:
        raise ValueError("a must be positive")
    sums = _as_sums(path)
    single = sums.ndim == 2
    if single:
        sums = sums[None]
    out = _arc_dev_batch(np.ascontiguousarray(sums, dtype=np.float64),
                         math.sqrt(2 * a / math.pi), SHAPE_ANGLES)
    return float(out[0]) if single else out


def weighted_quantiles(values, log_weights, qs):
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return np.full(len(qs), np.nan)
    w = np.exp(np.asarray(log_weights) - np.max(log_weights))
    order = np.argsort(values, kind="mergesort")
    cum = np.cumsum(w[order])
    cum /= cum[-1]
    idx = np.searchsorted(cum, np.asarray(qs, dtype=float), side="left")
    return values[order][np.minimum(idx, len(values) - 1)]


# -- estimators ------------------------------------------------------------

@dataclass
class TiltedCell:
    """Importance-sampling estimate at one n; probabilities kept as logs."""

    n: int
    trials: int
    hits: int
    log_p: float
    log_se: float  # standard error of p_hat divided by p_hat
    ess: float
    p_scaled: float = field(repr=False, default=0.0)
    log_scale: float = field(repr=False, default=0.0)
    deviations: Optional[np.ndarray] = field(default=None, repr=False)
    dev_log_weights: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def p_hat(self):
        return self.p_scaled * math.exp(self.log_scale) if self.hits else 0.0

    @property
    def std_err(self):
        return self.p_hat * self.log_se

    def __iter__(self):
        return iter((self.p_hat, self.std_err))


def _combine(parts, trials):
    """Merge per-block (max log w, sum w, sum w^2) triples in block order."""
    finite = [p for p in parts if np.isfinite(p[0])]
    if not finite:
        return -np.inf, 0.0, 0.0, 0.0
    m = max(p[0] for p in finite)
    s1 = math.fsum(p[1] * math.exp(p[0] - m) for p in finite)
    s2 = math.fsum(p[2] * math.exp(2 * (p[0] - m)) for p in finite)
    return m, s1, s2, (s1 * s1 / s2 if s2 > 0 else 0.0)


def tilted_ld_estimate(model, event, plan, n, trials, seed, shape=None,
                       check_ess=True, threads=None) -> TiltedCell:
    """Unbiased change-of-measure estimate of ``P(event)`` at one n.

    ``plan`` is a TiltPlan or a list of them (each trial picks one uniformly
    and is weighted by its own tilt). ``shape`` is None, ``("segment", x,
    angles, full_circle)`` or ``("arc", a)``; deviations are computed for
    up to SHAPE_SAMPLE event trials, taken in trial order.
    """
    plans = plan if isinstance(plan, (list, tuple)) else [plan]
    n, trials = int(n), int(trials)
    if trials < 1:
        raise ValueError("trials must be positive")

    def block(b, size):
        rng = _block_rng(seed, n, b)
        paths, logw = _plan_block(model, n, size, rng, plans)
        per, ar = geom.hull_perimeter_area(paths)
        hit = event.hits(per, ar, n)
        lw = logw[hit]
        if lw.size == 0:
            return (-np.inf, 0.0, 0.0), int(0), paths[:0], lw
        m = float(np.max(lw))
        e = np.exp(lw - m)
        return (m, math.fsum(e), math.fsum(e * e)), int(hit.sum()), paths[hit][:SHAPE_SAMPLE], lw

    results = _map_blocks(block, _blocks(trials), threads)
    hits = sum(r[1] for r in results)
    m, s1, s2, ess = _combine([r[0] for r in results], trials)
    if hits == 0:
        if check_ess:
            raise DegenerateWeights(f"no event hits in {trials} tilted trials at n={n}")
        return TiltedCell(n, trials, 0, -np.inf, np.inf, 0.0)
    if check_ess and ess < MIN_ESS:
        raise DegenerateWeights(f"effective sample size {ess:.2f} < {MIN_ESS:g} at n={n}")
    mean = s1 / trials
    var = max(s2 / trials - mean * mean, 0.0)
    log_se = math.sqrt(var / trials) / mean
    cell = TiltedCell(n, trials, hits, m + math.log(mean), log_se, ess, mean, m)
    if shape is not None:
        kept, kept_w, total = [], [], 0
        for r in results:
            if total >= SHAPE_SAMPLE:
                break
            take = min(len(r[2]), SHAPE_SAMPLE - total)
            kept.append(r[2][:take])
            kept_w.append(r[3][:take])
            total += take
        sums = np.concatenate(kept)
        if shape[0] == "segment":
            _, x, angles, full = shape
            dev = shape_deviation_segment(sums, x, angles, full)
        else:
            dev = shape_deviation_arc(sums, shape[1])
        cell.deviations = np.atleast_1d(dev)
        cell.dev_log_weights = np.concatenate(kept_w)
    return cell


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    ci: float
    se: float
    chi2_red: float
    n_used: np.ndarray
    residuals: np.ndarray

    def to_dict(self):
        return {"slope": self.slope, "intercept": self.intercept, "ci": self.ci, "se": self.se,
                "chi2_red": self.chi2_red, "n_used": [int(x) for x in self.n_used],
                "residuals": [float(x) for x in self.residuals]}


def fit_rate_slope(n, log_p, log_se=None):
    """Weighted least squares of ``log p_n`` on ``n``.

    Weights are ``1 / Var(log p_n)`` (delta method: ``se(p)/p``); with no
    usable standard errors the fit is unweighted. The 95% half-width is
    inflated by ``sqrt(chi2_red)`` when the residuals exceed their errors.
    Cells with ``log p = -inf`` are dropped.
    """
    n = np.asarray(n, dtype=float)
    y = np.asarray(log_p, dtype=float)
    se = np.zeros_like(y) if log_se is None else np.asarray(log_se, dtype=float)
    ok = np.isfinite(y)
    if ok.sum() < 3:
        raise InsufficientCells(f"need at least 3 cells with hits, got {int(ok.sum())}")
    n, y, se = n[ok], y[ok], se[ok]
    weighted = np.all(np.isfinite(se) & (se > 0))
    w = 1.0 / se**2 if weighted else np.ones_like(y)
    W = w.sum()
    nb_ = (w * n).sum() / W
    yb = (w * y).sum() / W
    sxx = (w * (n - nb_) ** 2).sum()
    slope = (w * (n - nb_) * (y - yb)).sum() / sxx
    intercept = yb - slope * nb_
    resid = y - (intercept + slope * n)
    dof = len(n) - 2
    if weighted:
        chi2 = float((w * resid**2).sum() / dof) if dof > 0 else 0.0
        slope_se = math.sqrt(1.0 / sxx) * math.sqrt(max(1.0, chi2))
    else:
        chi2 = float((resid**2).sum() / dof) if dof > 0 else 0.0
        slope_se = math.sqrt(chi2 / sxx) if dof > 0 else 0.0
    return SlopeFit(float(slope), float(intercept), 1.96 * slope_se, slope_se, chi2, n, resid)


@dataclass
class LdEstimate:
    """Per-n log-probability estimates for one event, with the fitted slope."""

    event: Event
    method: str  # "crude" or "tilted"
    n_grid: np.ndarray
    log_p: np.ndarray
    log_se: np.ndarray
    p_hat: np.ndarray
    std_err: np.ndarray
    hits: np.ndarray
    trials: int
    zero_hit: np.ndarray
    theoretical: Optional[tuple] = None  # (lower, upper) bracket on the slope
    cells: list = field(default_factory=list, repr=False)

    @property
    def level(self):
        return self.event.level

    @classmethod
    def from_probabilities(cls, n_grid, p_hat, std_err=None, event=None, trials=0):
        n_grid = np.asarray(n_grid, dtype=float)
        p = np.asarray(p_hat, dtype=float)
        se = np.zeros_like(p) if std_err is None else np.asarray(std_err, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            log_p = np.log(p)
            log_se = np.where(p > 0, se / p, np.inf)
        return cls(event or Event("always"), "synthetic", n_grid, log_p, log_se, p, se,
                   np.zeros(len(p), int), trials, p <= 0)

    def fit(self) -> SlopeFit:
        return fit_rate_slope(self.n_grid, self.log_p, self.log_se)

    def log_p_over_n(self):
        return self.log_p / self.n_grid

    def shape_quantiles(self, qs=(0.5,)):
        out = {}
        for c in self.cells:
            if getattr(c, "deviations", None) is not None:
                out[int(c.n)] = weighted_quantiles(c.deviations, c.dev_log_weights, qs)
        return out


def rate_slope(estimate: LdEstimate):
    fit = estimate.fit()
    return fit.slope, fit.ci


def crude_ld_estimate(model, event, n_grid, trials, seed, threads=None) -> LdEstimate:
    """Plain Monte Carlo indicator means; zero-hit cells are flagged."""
    n_grid = np.asarray(n_grid, dtype=int)
    trials = int(trials)
    hits = []
    for n in n_grid:
        def block(b, size, n=int(n)):
            paths = model.sample(_block_rng(seed, n, b), (size, n))
            per, ar = geom.hull_perimeter_area(np.cumsum(paths, axis=1))
            return int(np.count_nonzero(event.hits(per, ar, n)))
        hits.append(sum(_map_blocks(block, _blocks(trials), threads)))
    hits = np.array(hits)
    p = hits / trials
    se = np.sqrt(np.maximum(p - p * p, 0.0) / trials)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_p = np.log(p)
        log_se = np.where(hits > 0, se / p, np.inf)
    return LdEstimate(event, "crude", n_grid, log_p, log_se, p, se, hits, trials, hits == 0)


def tilted_ld_curve(model, event, plan, n_grid, trials, seed, shape=None,
                    threads=None) -> LdEstimate:
    """Tilted estimates over an n-grid. ``plan`` may be a callable ``n -> plan``."""
    cells = []
    for n in np.asarray(n_grid, dtype=int):
        pl = plan(int(n)) if callable(plan) else plan
        cells.append(tilted_ld_estimate(model, event, pl, int(n), trials, seed, shape,
                                        threads=threads))
    log_p = np.array([c.log_p for c in cells])
    log_se = np.array([c.log_se for c in cells])
    p = np.array([c.p_hat for c in cells])
    hits = np.array([c.hits for c in cells])
    return LdEstimate(event, "tilted", np.asarray(n_grid, dtype=int), log_p, log_se, p,
                      p * log_se, hits, int(trials), hits == 0, cells=cells)


# -- path functional and the expected perimeter ---------------------------

def path_cost_IC(model, path):
    """Discretized path cost ``sum_k I(n (s_k - s_{k-1})) / n``.

    ``path`` is a Polyline starting at the origin (n segments), or a
    WalkPath, whose partial sums are scaled by 1/n.
    """
    if isinstance(path, WalkPath):
        pts = np.vstack([np.zeros(2), path.partial_sums / path.n])
    else:
        pts = path.points if isinstance(path, geom.Polyline) else np.asarray(path, dtype=float)
        if not np.allclose(pts[0], 0.0, atol=1e-12):
            raise ValueError("path must start at the origin")
    n = len(pts) - 1
    if n < 1:
        raise ValueError("path needs at least one segment")
    vel = n * np.diff(pts, axis=0)
    vals = lft.rate_batch(model, vel)[0]
    if not np.all(np.isfinite(vals)):
        return np.inf
    return math.fsum(vals) / n


@dataclass(frozen=True)
class SpitzerWidom:
    lhs: float  # mean hull perimeter
    rhs: float  # mean of 2 sum_k |S_k| / k
    lhs_se: float
    rhs_se: float
    diff_se: float
    analytic: Optional[float]

    def __iter__(self):
        return iter((self.lhs, self.rhs, self.analytic))


def _isotropic_scale(model):
    if isinstance(model, Gaussian):
        cov = model.cov
        if np.allclose(model.mu, 0) and abs(cov[0, 1]) == 0 and cov[0, 0] == cov[1, 1]:
            return float(cov[0, 0])
    if isinstance(model, RotationallyInvariant) and model.radial_law == "isotropic-gaussian":
        m = model.linear_map
        if np.allclose(model.shift, 0) and np.allclose(m @ m.T, m[0, 0] ** 2 * np.eye(2)):
            return float(model.radius**2 * m[0, 0] ** 2)
    return None


def spitzer_widom_check(model, n, trials, seed, threads=None) -> SpitzerWidom:
    """Both sides of ``E P_n = 2 sum_k E|S_k| / k`` from one ensemble.

    The closed form ``sqrt(2 pi c) sum_k k^(-1/2)`` is attached for
    centred isotropic Gaussian steps with per-coordinate variance ``c``.
    """
    n, trials = int(n), int(trials)
    inv_k = 1.0 / np.arange(1, n + 1)

    def block(b, size):
        sums = np.cumsum(model.sample(_block_rng(seed, n, b), (size, n)), axis=1)
        per, _ = geom.hull_perimeter_area(sums)
        rhs = 2.0 * (np.hypot(sums[..., 0], sums[..., 1]) @ inv_k)
        d = per - rhs
        return (math.fsum(per), math.fsum(per * per), math.fsum(rhs), math.fsum(rhs * rhs),
                math.fsum(d), math.fsum(d * d))

    parts = np.array(_map_blocks(block, _blocks(trials), threads))
    tot = [math.fsum(parts[:, j]) for j in range(6)]

    def mean_se(s1, s2):
        m = s1 / trials
        return m, math.sqrt(max(s2 / trials - m * m, 0.0) / trials)

    lhs, lhs_se = mean_se(tot[0], tot[1])
    rhs, rhs_se = mean_se(tot[2], tot[3])
    _, diff_se = mean_se(tot[4], tot[5])
    c = _isotropic_scale(model)
    analytic = None
    if c is not None:
        analytic = math.sqrt(2 * math.pi * c) * math.fsum(np.arange(1, n + 1) ** -0.5)
    return SpitzerWidom(lhs, rhs, lhs_se, rhs_se, diff_se, analytic)


def boundary_probability(model, n):
    """Exact ``P(P_n >= 2 r_max n)`` for atomic laws: the walk must repeat
    one atom at radius r_max every step."""
    meta = model.support_metadata()
    atoms = meta.atoms or []
    masses = [m for pt, m in atoms if abs(np.hypot(*pt) - meta.r_max) <= 1e-12 * (1 + meta.r_max)]
    return math.fsum(m**n for m in masses)
