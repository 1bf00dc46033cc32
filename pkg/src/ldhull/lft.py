"""Legendre-Fenchel transforms of smooth convex functions.

The planar conjugate ``F*(v) = sup_u (u . v - F(u))`` is computed by a
batched damped Newton ascent; points outside the effective domain are
classified as ``+inf`` by watching the iterates escape. One-dimensional
conjugates over ``p >= 0`` and lower convex envelopes of tabulated
functions complete the toolkit.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import optimize

from .dist import DistributionModel, is_extremal_atom
from .errors import EmptyDomain, NoConvergence, NotExtremalAtom, Unbounded

__all__ = [
    "ConvexOracle",
    "ConjugateResult",
    "PiecewiseLinearConvex",
    "as_oracle",
    "rate",
    "rate_batch",
    "conjugate_1d",
    "lower_convex_envelope",
    "rate_at_extremal_atom",
    "affine_structure",
]

GRAD_TOL = 1e-10
MAX_ITER = 500
ESCAPE_RADIUS = 1e3
MONOTONE_WINDOW = 50
ARMIJO_C = 1e-4
FLAT_NOISE = 1e-13


@dataclass(frozen=True)
class ConvexOracle:
    """A finite convex function on the plane with its derivatives.

    The callables take arrays of shape ``(..., 2)``. Without ``hessian``
    the Hessian is taken by central differences of ``gradient``.
    """

    value: Callable
    gradient: Callable
    hessian: Optional[Callable] = None

    def hess(self, u):
        if self.hessian is not None:
            return self.hessian(u)
        u = np.asarray(u, dtype=float)
        h = 1e-6 * (1.0 + np.linalg.norm(u, axis=-1))[..., None]
        cols = []
        for e in np.eye(2):
            cols.append((self.gradient(u + h * e) - self.gradient(u - h * e)) / (2 * h))
        hm = np.stack(cols, axis=-1)
        return 0.5 * (hm + np.swapaxes(hm, -1, -2))

    def midpoint_violation(self, rng, probes=100, scale=3.0):
        """Largest ``F((u+w)/2) - (F(u)+F(w))/2`` over random pairs in a disk."""
        pts = rng.uniform(-scale, scale, size=(2, probes, 2))
        a, b = pts
        gap = self.value(0.5 * (a + b)) - 0.5 * (self.value(a) + self.value(b))
        return float(np.max(gap))


@dataclass(frozen=True)
class ConjugateResult:
    value: float
    maximizer: Optional[np.ndarray]
    converged: bool
    iterations: int

    @property
    def finite(self):
        return bool(np.isfinite(self.value))

    def to_dict(self):
        return {
            "value": self.value if self.finite else "inf",
            "maximizer": None if self.maximizer is None else [float(x) for x in self.maximizer],
            "converged": self.converged,
            "iterations": self.iterations,
        }


def as_oracle(obj) -> ConvexOracle:
    if isinstance(obj, ConvexOracle):
        return obj
    if isinstance(obj, DistributionModel):
        return ConvexOracle(obj.cumulant, obj.cumulant_gradient, obj.cumulant_hessian)
    raise TypeError(f"expected a ConvexOracle or DistributionModel, got {type(obj).__name__}")


@dataclass(frozen=True)
class AffineStructure:
    """Where the conjugate can be finite: ``center + span(basis)``."""

    rank: int
    center: np.ndarray
    basis: np.ndarray  # (2, rank)

    def residual(self, v):
        v = np.asarray(v, dtype=float)
        d = v - self.center
        if self.rank == 2:
            return np.zeros(v.shape[:-1])
        if self.rank == 1:
            e = self.basis[:, 0]
            return np.abs(d[..., 0] * e[1] - d[..., 1] * e[0])
        return np.hypot(d[..., 0], d[..., 1])


def affine_structure(obj, tol=1e-12) -> AffineStructure:
    """Rank of the Hessian and the affine hull it implies.

    For a cumulant the Hessian has constant rank equal to the dimension of
    the affine hull of the support; the gradient at zero lies on it.
    """
    oracle = as_oracle(obj)
    probes = np.array([[0.0, 0.0], [0.3, -0.2], [-0.4, 0.5], [1.1, 0.7]])
    hs = oracle.hess(probes)
    total = np.sum(hs, axis=0)
    lam, vec = np.linalg.eigh(0.5 * (total + total.T))
    top = max(lam.max(), 0.0)
    keep = lam > tol * top if top > 0 else np.zeros(2, bool)
    center = np.asarray(oracle.gradient(np.zeros(2)), dtype=float)
    return AffineStructure(int(keep.sum()), center, vec[:, keep])


def _newton_batch(oracle, V, basis, grad_tol=GRAD_TOL, max_iter=MAX_ITER):
    """Maximize ``u . v - F(u)`` over ``u = basis @ s`` for each row of V."""
    m, k = V.shape[0], basis.shape[1]
    S = np.zeros((m, k))
    vnorm = np.hypot(V[:, 0], V[:, 1])
    tol = grad_tol * (1.0 + vnorm)
    value = np.full(m, np.nan)
    iters = np.zeros(m, dtype=int)
    status = np.zeros(m, dtype=int)  # 0 running, 1 converged, 2 divergent
    streak = np.zeros(m, dtype=int)
    Vb = V @ basis

    def phi(idx, s):
        u = s @ basis.T
        return np.sum(s * Vb[idx], axis=-1) - oracle.value(u)

    active = np.arange(m)
    f_cur = phi(active, S)
    for it in range(max_iter + 1):
        if active.size == 0:
            break
        s = S[active]
        u = s @ basis.T
        g = Vb[active] - oracle.gradient(u) @ basis
        gn = np.linalg.norm(g, axis=-1)
        done = gn < tol[active]
        snorm = np.linalg.norm(s, axis=-1)
        gdir = np.sum(g * s, axis=-1) / np.where(snorm > 0, snorm, 1.0)
        escaped = (snorm > ESCAPE_RADIUS) & (streak[active] >= MONOTONE_WINDOW) & (gdir > tol[active])
        status[active[done]] = 1
        status[active[escaped & ~done]] = 2
        iters[active] = it
        value[active[done]] = f_cur[active[done]]
        live = ~(done | escaped)
        active, s, g, gn, snorm = active[live], s[live], g[live], gn[live], snorm[live]
        if active.size == 0 or it == max_iter:
            break
        H = basis.T @ oracle.hess(s @ basis.T) @ basis
        reg = 1e-14 * (1.0 + np.trace(H, axis1=-2, axis2=-1))
        d = np.linalg.solve(H + reg[:, None, None] * np.eye(k), g[..., None])[..., 0]
        slope = np.sum(d * g, axis=-1)
        bad = ~np.isfinite(slope) | (slope <= 0)
        d[bad] = g[bad]
        slope[bad] = np.sum(g[bad] * g[bad], axis=-1)
        dn = np.linalg.norm(d, axis=-1)
        cap = np.maximum(1.0, np.minimum(snorm, ESCAPE_RADIUS))
        scale = np.minimum(1.0, cap / np.where(dn > 0, dn, 1.0))
        d = d * scale[:, None]
        slope = slope * scale

        t = np.ones(active.size)
        f0 = f_cur[active]
        accepted = np.zeros(active.size, bool)
        f_new = f0.copy()
        s_new = s.copy()
        pending = np.arange(active.size)
        for _ in range(60):
            if pending.size == 0:
                break
            trial = s[pending] + t[pending, None] * d[pending]
            ft = phi(active[pending], trial)
            gain = t[pending] * slope[pending]
            # near the optimum the predicted gain drops below the rounding
            # noise of the objective; judge such steps by the gradient norm
            noise = FLAT_NOISE * (1.0 + np.abs(f0[pending]))
            flat = (gain < noise) & (ft >= f0[pending] - noise)
            ok = ~flat & (ft >= f0[pending] + ARMIJO_C * gain)
            if np.any(flat):
                ut = trial[flat] @ basis.T
                gt = Vb[active[pending[flat]]] - oracle.gradient(ut) @ basis
                ok[np.flatnonzero(flat)] = np.linalg.norm(gt, axis=-1) <= 0.9 * gn[pending[flat]]
            acc = pending[ok]
            accepted[acc] = True
            f_new[acc] = ft[ok]
            s_new[acc] = trial[ok]
            pending = pending[~ok]
            t[pending] *= 0.5
        grew = accepted & (f_new > f0)
        streak[active] = np.where(grew, streak[active] + 1, 0)
        S[active] = s_new
        f_cur[active] = f_new
        if np.any(~accepted):
            # no ascent possible at machine precision: stationary
            stuck = active[~accepted]
            status[stuck] = 1
            value[stuck] = f_cur[stuck]
            iters[stuck] = it + 1
            keep = accepted
            active = active[keep]
    running = status == 0
    value[status == 2] = np.inf
    return value, S @ basis.T, iters, status, running


def rate_batch(obj, V, grad_tol=GRAD_TOL, max_iter=MAX_ITER, raise_on_cap=True):
    """Conjugate values at many points.

    Returns ``(values, maximizers, iterations, converged)``; divergent points
    have value ``+inf`` and a NaN maximizer.
    """
    oracle = as_oracle(obj)
    V = np.asarray(V, dtype=float)
    shape = V.shape[:-1]
    V = V.reshape(-1, 2)
    st = affine_structure(oracle)
    values = np.full(len(V), np.inf)
    maxim = np.full((len(V), 2), np.nan)
    iters = np.zeros(len(V), dtype=int)
    conv = np.ones(len(V), bool)
    on = st.residual(V) <= 1e-9 * (1.0 + np.hypot(V[:, 0], V[:, 1]))
    if st.rank == 0:
        values[on] = 0.0
        maxim[on] = 0.0
    elif np.any(on):
        idx = np.flatnonzero(on)
        val, u, it, status, running = _newton_batch(oracle, V[idx], st.basis, grad_tol, max_iter)
        if raise_on_cap and np.any(running):
            bad = V[idx[np.flatnonzero(running)[0]]]
            raise NoConvergence(f"rate: iteration cap {max_iter} hit at v={bad.tolist()}")
        values[idx] = val
        fin = np.isfinite(val)
        maxim[idx[fin]] = u[fin]
        iters[idx] = it
        conv[idx] = ~running
    return (values.reshape(shape), maxim.reshape(shape + (2,)), iters.reshape(shape),
            conv.reshape(shape))


def rate(obj, v, **kw) -> ConjugateResult:
    """Convex conjugate ``sup_u (u . v - F(u))`` at a single point."""
    val, u, it, conv = rate_batch(obj, np.asarray(v, dtype=float)[None], **kw)
    finite = bool(np.isfinite(val[0]))
    return ConjugateResult(float(val[0]), u[0].copy() if finite else None, bool(conv[0]), int(it[0]))


def _right_slope(f, p):
    # second-order one-sided difference, so kinks at p are not straddled
    h = 1e-5 * (1.0 + abs(p))
    return (-3.0 * f(p) + 4.0 * f(p + h) - f(p + 2 * h)) / (2 * h)


def conjugate_1d(f, r, derivative=None, p_max=1e6):
    """``sup_{p >= 0} (p r - f(p))`` for convex ``f``; returns ``(value, p)``.

    ``derivative`` should be the right derivative when ``f`` has kinks.
    Raises Unbounded when the objective still increases at ``p_max``.
    """
    df = derivative if derivative is not None else (lambda p: _right_slope(f, p))
    slope = lambda p: r - df(p)  # noqa: E731
    if slope(0.0) <= 0:
        return float(-f(0.0)), 0.0
    lo, hi = 0.0, 1.0
    while slope(hi) > 0:
        if hi >= p_max:
            raise Unbounded(f"objective still increasing at p={p_max:g} for r={r!r}")
        lo, hi = hi, min(2.0 * hi, p_max)
    p = optimize.brentq(slope, lo, hi, xtol=1e-14, rtol=8.9e-16, maxiter=500)
    # for a kinked f the root sits on the jump of the slope
    return float(p * r - f(p)), float(p)


@dataclass(frozen=True)
class PiecewiseLinearConvex:
    """Convex piecewise-linear function, ``+inf`` off ``[x[0], x[-1]]``."""

    x: np.ndarray
    y: np.ndarray

    @property
    def slopes(self):
        return np.diff(self.y) / np.diff(self.x)

    @property
    def domain(self):
        return float(self.x[0]), float(self.x[-1])

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        out = np.interp(r, self.x, self.y)
        return np.where((r < self.x[0]) | (r > self.x[-1]), np.inf, out)


def lower_convex_envelope(r, values=None) -> PiecewiseLinearConvex:
    """Largest convex minorant of a tabulated function.

    Accepts either a list of ``(r, value)`` pairs or two arrays. Infinite
    values are ignored; the envelope is the lower hull of the finite graph
    points, built with a monotone chain.
    """
    if values is None:
        table = np.asarray(r, dtype=float).reshape(-1, 2)
        r, values = table[:, 0], table[:, 1]
    r = np.asarray(r, dtype=float)
    values = np.asarray(values, dtype=float)
    if np.any(np.diff(r) <= 0):
        raise ValueError("abscissae must be strictly increasing")
    fin = np.isfinite(values)
    if not np.any(fin):
        raise EmptyDomain("no finite values to envelope")
    xs, ys = r[fin], values[fin]
    hull = []
    for i in range(len(xs)):
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            cross = (xs[b] - xs[a]) * (ys[i] - ys[a]) - (ys[b] - ys[a]) * (xs[i] - xs[a])
            if cross <= 0:
                hull.pop()
            else:
                break
        hull.append(i)
    return PiecewiseLinearConvex(xs[hull], ys[hull])


def rate_at_extremal_atom(model, v):
    """Rate at an atom that is a vertex of the support hull: ``-log mass``."""
    mass = is_extremal_atom(model, v)
    if mass is None:
        raise NotExtremalAtom(f"{np.asarray(v).tolist()} is not an extremal atom")
    return float(-np.log(mass))
