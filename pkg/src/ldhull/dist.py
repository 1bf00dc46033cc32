"""Walk-increment laws with exact cumulant generating functions.

Every model evaluates ``K(u) = log E exp(u . X)`` together with its gradient
and Hessian on arrays of 2-vectors (shape ``(..., 2)``), samples increments
(optionally exponentially tilted), and reports support geometry.

The catalogue is:

- :class:`Gaussian` - ``N(mean, cov)``, possibly degenerate;
- :class:`DiscreteAtoms` - finitely many weighted points;
- :class:`RotationallyInvariant` - ``shift + linear_map @ R`` with ``R``
  uniform on a disk, uniform on a circle or isotropic Gaussian;
- :class:`Mixture` - weighted mixture of the above;
- :class:`OneDimensional` - a law on the affine line ``offset + t*direction``.

All laws have a finite Laplace transform everywhere. Heavy-tailed kinds
are rejected by :func:`parse_distribution`.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import optimize, special

from .errors import ConfigError
from .geom import convex_hull

__all__ = [
    "SupportMeta",
    "DistributionModel",
    "Gaussian",
    "DiscreteAtoms",
    "RotationallyInvariant",
    "Mixture",
    "OneDimensional",
    "cumulant",
    "cumulant_gradient",
    "cumulant_hessian",
    "sample_increment",
    "support_metadata",
    "parse_distribution",
    "two_atom_line",
    "skewed_three_atom_line",
]

PROB_TOL = 1e-12
RADIAL_LAWS = ("uniform-disk", "uniform-circle", "isotropic-gaussian")


@dataclass(frozen=True)
class SupportMeta:
    mean: np.ndarray
    covariance: np.ndarray
    r_min: float
    r_max: float
    atoms: Optional[list] = None  # [(point, mass), ...]

    @property
    def mean_radius(self):
        return float(np.hypot(*self.mean))


def _vec2(x, name="vector"):
    arr = np.asarray(x, dtype=float)
    if arr.shape != (2,):
        raise ValueError(f"{name} must be a 2-vector, got shape {arr.shape}")
    return arr


def _probs(p, name="probs"):
    p = np.asarray(p, dtype=float).ravel()
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise ValueError(f"{name} must be finite and nonnegative")
    if abs(p.sum() - 1.0) > PROB_TOL:
        raise ValueError(f"{name} must sum to 1 (got {p.sum()!r})")
    return p


def _log_mix(z, p):
    """``log sum p_j exp(z_j) - log sum p_j``; exactly 0 when z == 0."""
    zmax = np.max(z, axis=-1, keepdims=True)
    s = np.sum(p * np.exp(z - zmax), axis=-1)
    return zmax[..., 0] + np.log(s) - np.log(np.sum(p))


def _softmax(z, p):
    w = p * np.exp(z - np.max(z, axis=-1, keepdims=True))
    return w / np.sum(w, axis=-1, keepdims=True)


def _as_u(u):
    u = np.asarray(u, dtype=float)
    if u.shape[-1] != 2:
        raise ValueError("cumulant arguments must have trailing dimension 2")
    return u


def _distance_to_hull(points, lin_dirs):
    """Distance from the origin to ``conv(points) + span(lin_dirs)``."""
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(lin_dirs) >= 2 and abs(lin_dirs[0][0] * lin_dirs[1][1] - lin_dirs[0][1] * lin_dirs[1][0]) > 1e-12:
        return 0.0
    if len(lin_dirs) >= 1:
        e = np.asarray(lin_dirs[0], dtype=float)
        e = e / np.hypot(*e)
        nrm = np.array([-e[1], e[0]])
        s = points @ nrm
        lo, hi = s.min(), s.max()
        return 0.0 if lo <= 0.0 <= hi else float(min(abs(lo), abs(hi)))
    hull = convex_hull(points)
    v = hull.vertices
    if hull.degeneracy == "point":
        return float(np.hypot(*v[0]))
    if hull.degeneracy == "full":
        edges = np.roll(v, -1, axis=0) - v
        if np.all(edges[:, 0] * (-v[:, 1]) - edges[:, 1] * (-v[:, 0]) >= 0):
            return 0.0
    segs = [(v[i], v[(i + 1) % len(v)]) for i in range(len(v))]
    best = np.inf
    for a, b in segs:
        d = b - a
        t = np.clip(-(a @ d) / (d @ d), 0.0, 1.0)
        best = min(best, float(np.hypot(*(a + t * d))))
    return best


def _is_vertex(points, v, tol=1e-12):
    hull = convex_hull(points)
    scale = 1.0 + np.max(np.abs(points))
    return bool(np.any(np.all(np.abs(hull.vertices - v) <= tol * scale, axis=1)))


class DistributionModel:
    """Base class; subclasses implement the cumulant triple and sampling."""

    kind = "abstract"

    def cumulant(self, u):
        raise NotImplementedError

    def cumulant_gradient(self, u):
        raise NotImplementedError

    def cumulant_hessian(self, u):
        raise NotImplementedError

    def sample(self, rng, size=(), tilt=None):
        """Draw increments, optionally from the law tilted by ``exp(u . X)``.

        ``tilt`` must broadcast to ``size + (2,)``. A zero tilt reproduces
        the untilted draws bit for bit.
        """
        raise NotImplementedError

    def support_geometry(self):
        """``(points, lin_dirs)`` with ``conv(supp) = conv(points) + span(lin_dirs)``.

        Curved boundaries are approximated by inscribed polygons.
        """
        raise NotImplementedError

    @property
    def mean(self):
        return self.cumulant_gradient(np.zeros(2))

    @property
    def covariance(self):
        return self.cumulant_hessian(np.zeros(2))

    def atoms(self):
        return None

    def support_metadata(self) -> SupportMeta:
        points, lin = self.support_geometry()
        r_max = np.inf if lin else float(np.max(np.hypot(points[:, 0], points[:, 1])))
        return SupportMeta(
            self.mean, self.covariance, _distance_to_hull(points, lin), r_max, self.atoms()
        )

    def _tilt_array(self, size, tilt):
        shape = tuple(np.atleast_1d(size)) if size != () else ()
        if tilt is None:
            tilt = np.zeros(2)
        return np.broadcast_to(np.asarray(tilt, dtype=float), shape + (2,)), shape


class Gaussian(DistributionModel):
    kind = "gaussian"

    def __init__(self, mean, cov):
        self.mu = _vec2(mean, "mean")
        cov = np.asarray(cov, dtype=float)
        if cov.shape != (2, 2):
            raise ValueError("covariance must be 2x2")
        if not np.allclose(cov, cov.T, atol=1e-14):
            raise ValueError("covariance must be symmetric")
        lam, vec = np.linalg.eigh(cov)
        if lam.min() < -1e-12 * max(1.0, lam.max()):
            raise ValueError("covariance must be positive semidefinite")
        self.cov = 0.5 * (cov + cov.T)
        self._lam = np.clip(lam, 0.0, None)
        self._vec = vec
        self._root = vec * np.sqrt(self._lam)

    def __repr__(self):
        return f"Gaussian(mean={self.mu.tolist()}, cov={self.cov.tolist()})"

    def cumulant(self, u):
        u = _as_u(u)
        return u @ self.mu + 0.5 * np.einsum("...i,ij,...j->...", u, self.cov, u)

    def cumulant_gradient(self, u):
        u = _as_u(u)
        return self.mu + u @ self.cov

    def cumulant_hessian(self, u):
        u = _as_u(u)
        return np.broadcast_to(self.cov, u.shape[:-1] + (2, 2)).copy()

    def sample(self, rng, size=(), tilt=None):
        tilt, shape = self._tilt_array(size, tilt)
        z = rng.standard_normal(shape + (2,))
        return (self.mu + tilt @ self.cov) + z @ self._root.T

    def _rank(self):
        top = max(self._lam.max(), 0.0)
        return int(np.sum(self._lam > 1e-12 * max(top, 1e-300))) if top > 0 else 0

    def support_geometry(self):
        rank = self._rank()
        if rank == 2:
            return self.mu[None], [np.array([1.0, 0.0]), np.array([0.0, 1.0])]
        if rank == 1:
            e = self._vec[:, int(np.argmax(self._lam))]
            return self.mu[None], [e]
        return self.mu[None], []

    def atoms(self):
        return [(self.mu.copy(), 1.0)] if self._rank() == 0 else None


class DiscreteAtoms(DistributionModel):
    kind = "atoms"

    def __init__(self, points, probs):
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        p = _probs(probs)
        if len(p) != len(pts):
            raise ValueError("points and probs must have equal length")
        keep = p > 0
        self.points = pts[keep]
        self.probs = p[keep]

    def __repr__(self):
        return f"DiscreteAtoms(points={self.points.tolist()}, probs={self.probs.tolist()})"

    def cumulant(self, u):
        return _log_mix(_as_u(u) @ self.points.T, self.probs)

    def cumulant_gradient(self, u):
        return _softmax(_as_u(u) @ self.points.T, self.probs) @ self.points

    def cumulant_hessian(self, u):
        w = _softmax(_as_u(u) @ self.points.T, self.probs)
        g = w @ self.points
        second = np.einsum("...j,ja,jb->...ab", w, self.points, self.points)
        return second - g[..., :, None] * g[..., None, :]

    def _tilted_choice(self, rng, tilt, shape):
        logits = tilt @ self.points.T
        w = _softmax(logits, self.probs)
        cum = np.cumsum(w, axis=-1)
        cum[..., -1] = 1.0
        u = rng.random(shape)
        idx = np.sum(cum[..., :-1] <= u[..., None], axis=-1)
        return idx

    def sample(self, rng, size=(), tilt=None):
        tilt, shape = self._tilt_array(size, tilt)
        return self.points[self._tilted_choice(rng, tilt, shape)]

    def support_geometry(self):
        return self.points, []

    def atoms(self):
        return [(pt.copy(), float(m)) for pt, m in zip(self.points, self.probs)]


# -- radial laws -----------------------------------------------------------

def _bessel_series(q, nu, terms=40):
    """sum_k q^k / (k! (k+nu)!) for small q."""
    out = np.zeros_like(q)
    term = np.full_like(q, 1.0 / special.factorial(nu))
    for k in range(terms):
        out += term
        term = term * q / ((k + 1) * (k + 1 + nu))
    return out


def _radial_parts(law, x):
    """log L(x), its derivative g1, g1/x and second derivative g2.

    ``L`` is the Laplace transform of the projection of the unit-radius law
    on a fixed axis, as a function of the tilt modulus ``x``.
    """
    x = np.asarray(x, dtype=float)
    if law == "isotropic-gaussian":
        return 0.5 * x * x, x, np.ones_like(x), np.ones_like(x)
    small = x <= 2.0
    xs = np.where(small, x, 1.0)
    xl = np.where(small, 3.0, x)
    q = 0.25 * xs * xs
    if law == "uniform-circle":
        # L = I0(x); g1 = I1/I0
        s0 = _bessel_series(q, 0)
        s1 = _bessel_series(q, 1)
        g_small = np.log1p(s0 - 1.0)
        r_small = 0.5 * s1 / s0  # g1 / x
        g_large = np.log(special.ive(0, xl)) + xl
        a_large = special.ive(1, xl) / special.ive(0, xl)
        g = np.where(small, g_small, g_large)
        g1_over_x = np.where(small, r_small, a_large / xl)
        g1 = g1_over_x * x
        g2 = 1.0 - g1_over_x - g1 * g1
        return g, g1, g1_over_x, g2
    if law == "uniform-disk":
        # L = 2 I1(x)/x; g1 = I2/I1
        s1 = _bessel_series(q, 1)
        s2 = _bessel_series(q, 2)
        g_small = np.log1p(s1 - 1.0)
        r_small = 0.5 * s2 / s1
        g_large = np.log(2.0 * special.ive(1, xl) / xl) + xl
        b_large = special.ive(2, xl) / special.ive(1, xl)
        g = np.where(small, g_small, g_large)
        g1_over_x = np.where(small, r_small, b_large / xl)
        g1 = g1_over_x * x
        g2 = 1.0 - 3.0 * g1_over_x - g1 * g1
        return g, g1, g1_over_x, g2
    raise ValueError(f"unknown radial law {law!r}")


_RADIAL_VARIANCE = {"uniform-disk": 0.25, "uniform-circle": 0.5, "isotropic-gaussian": 1.0}


def _boundary_extreme(f, sense):
    """Extremum of f(theta) over the circle: dense grid then bounded Brent."""
    th = np.linspace(0.0, 2 * np.pi, 4096, endpoint=False)
    vals = f(th)
    j = int(np.argmin(vals) if sense == "min" else np.argmax(vals))
    sign = 1.0 if sense == "min" else -1.0
    step = th[1] - th[0]
    res = optimize.minimize_scalar(
        lambda t: sign * float(f(np.array([t]))[0]),
        bounds=(th[j] - step, th[j] + step),
        method="bounded",
        options={"xatol": 1e-13},
    )
    return min(sign * res.fun, sign * vals[j]) * sign


class RotationallyInvariant(DistributionModel):
    """``X = shift + linear_map @ R`` with ``R`` rotationally invariant.

    ``radius`` is the disk/circle radius, or the standard deviation per
    coordinate for ``isotropic-gaussian``.
    """

    kind = "rotinv"

    def __init__(self, radial_law, radius=1.0, shift=(0.0, 0.0), linear_map=None):
        if radial_law not in RADIAL_LAWS:
            raise ValueError(f"radial_law must be one of {RADIAL_LAWS}")
        if not radius > 0:
            raise ValueError("radius must be positive")
        self.radial_law = radial_law
        self.radius = float(radius)
        self.shift = _vec2(shift, "shift")
        m = np.eye(2) if linear_map is None else np.asarray(linear_map, dtype=float)
        if m.shape != (2, 2):
            raise ValueError("linear_map must be 2x2")
        self.linear_map = m

    def __repr__(self):
        return (
            f"RotationallyInvariant({self.radial_law!r}, radius={self.radius}, "
            f"shift={self.shift.tolist()}, linear_map={self.linear_map.tolist()})"
        )

    def _w(self, u):
        w = _as_u(u) @ self.linear_map
        nw = np.hypot(w[..., 0], w[..., 1])
        return w, nw

    def cumulant(self, u):
        u = _as_u(u)
        _, nw = self._w(u)
        g = _radial_parts(self.radial_law, self.radius * nw)[0]
        return u @ self.shift + g

    def cumulant_gradient(self, u):
        w, nw = self._w(u)
        rho = self.radius
        g1_over_x = _radial_parts(self.radial_law, rho * nw)[2]
        return self.shift + (rho * rho * g1_over_x)[..., None] * (w @ self.linear_map.T)

    def cumulant_hessian(self, u):
        w, nw = self._w(u)
        rho = self.radius
        _, _, g1x, g2 = _radial_parts(self.radial_law, rho * nw)
        safe = np.where(nw > 0, nw, 1.0)
        what = np.where((nw > 0)[..., None], w / safe[..., None], 0.0)
        inner = rho * rho * (
            (g2 - g1x)[..., None, None] * what[..., :, None] * what[..., None, :]
            + g1x[..., None, None] * np.eye(2)
        )
        m = self.linear_map
        return m @ inner @ m.T

    def sample(self, rng, size=(), tilt=None):
        tilt, shape = self._tilt_array(size, tilt)
        w = tilt @ self.linear_map
        rho = self.radius
        kappa = rho * np.hypot(w[..., 0], w[..., 1])
        if self.radial_law == "isotropic-gaussian":
            z = rng.standard_normal(shape + (2,))
            r = rho * rho * w + rho * z
        elif self.radial_law == "uniform-circle":
            phi = np.arctan2(w[..., 1], w[..., 0])
            th = rng.vonmises(phi, kappa, size=shape)
            r = rho * np.stack([np.cos(th), np.sin(th)], axis=-1)
        else:
            r = rho * _tilted_unit_disk(rng, w, kappa, shape)
        return self.shift + r @ self.linear_map.T

    def _ellipse(self, th):
        c = np.stack([np.cos(th), np.sin(th)], axis=-1)
        return self.shift + self.radius * c @ self.linear_map.T

    def support_geometry(self):
        if self.radial_law == "isotropic-gaussian":
            return Gaussian(self.shift, self.covariance).support_geometry()
        th = np.linspace(0.0, 2 * np.pi, 2048, endpoint=False)
        return self._ellipse(th), []

    def support_metadata(self):
        if self.radial_law == "isotropic-gaussian":
            meta = Gaussian(self.shift, self.covariance).support_metadata()
            return SupportMeta(self.mean, self.covariance, meta.r_min, meta.r_max, None)
        norm = lambda th: np.hypot(*self._ellipse(th).T)  # noqa: E731
        r_max = _boundary_extreme(norm, "max")
        inside = False
        if abs(np.linalg.det(self.linear_map)) > 1e-14:
            y = np.linalg.solve(self.linear_map, -self.shift)
            inside = np.hypot(*y) <= self.radius
        r_min = 0.0 if inside else _boundary_extreme(norm, "min")
        return SupportMeta(self.mean, self.covariance, float(r_min), float(r_max), None)


def _tilted_unit_disk(rng, w, kappa, shape):
    """Uniform unit-disk points tilted by exp(w . y), by rejection on the axis."""
    nw = np.hypot(w[..., 0], w[..., 1])
    e = np.where((nw > 0)[..., None], w / np.where(nw > 0, nw, 1.0)[..., None], [1.0, 0.0])
    e = np.broadcast_to(e, shape + (2,))
    kap = np.broadcast_to(kappa, shape).ravel()
    out_s = np.empty(kap.shape)
    pending = np.arange(kap.size)
    while pending.size:
        k = kap[pending]
        u = rng.random(pending.size)
        flat = k < 1e-8
        kk = np.where(flat, 1.0, k)
        # truncated exponential on [-1, 1] with rate kappa
        s = np.where(flat, 2.0 * u - 1.0, 1.0 + np.log(u + (1.0 - u) * np.exp(-2.0 * kk)) / kk)
        acc = rng.random(pending.size) <= np.sqrt(np.clip(1.0 - s * s, 0.0, None))
        out_s[pending[acc]] = s[acc]
        pending = pending[~acc]
    s = out_s.reshape(shape)
    half = np.sqrt(np.clip(1.0 - s * s, 0.0, None))
    t = (2.0 * rng.random(shape) - 1.0) * half
    perp = np.stack([-e[..., 1], e[..., 0]], axis=-1)
    return s[..., None] * e + t[..., None] * perp


class Mixture(DistributionModel):
    kind = "mixture"

    def __init__(self, components: Sequence):
        if not components:
            raise ValueError("mixture needs at least one component")
        self.weights = _probs([w for w, _ in components], "mixture weights")
        self.components = [m for _, m in components]

    def __repr__(self):
        parts = ", ".join(f"({w}, {m!r})" for w, m in zip(self.weights, self.components))
        return f"Mixture([{parts}])"

    def _z(self, u):
        return np.stack([c.cumulant(u) for c in self.components], axis=-1)

    def cumulant(self, u):
        return _log_mix(self._z(_as_u(u)), self.weights)

    def cumulant_gradient(self, u):
        u = _as_u(u)
        s = _softmax(self._z(u), self.weights)
        g = np.stack([c.cumulant_gradient(u) for c in self.components], axis=-2)
        return np.einsum("...i,...ia->...a", s, g)

    def cumulant_hessian(self, u):
        u = _as_u(u)
        s = _softmax(self._z(u), self.weights)
        g = np.stack([c.cumulant_gradient(u) for c in self.components], axis=-2)
        h = np.stack([c.cumulant_hessian(u) for c in self.components], axis=-3)
        second = h + g[..., :, None] * g[..., None, :]
        tot = np.einsum("...i,...iab->...ab", s, second)
        mean = np.einsum("...i,...ia->...a", s, g)
        return tot - mean[..., :, None] * mean[..., None, :]

    def sample(self, rng, size=(), tilt=None):
        tilt, shape = self._tilt_array(size, tilt)
        s = _softmax(self._z(tilt), self.weights)
        cum = np.cumsum(s, axis=-1)
        cum[..., -1] = 1.0
        idx = np.sum(cum[..., :-1] <= rng.random(shape)[..., None], axis=-1)
        out = np.empty(shape + (2,))
        for i, comp in enumerate(self.components):
            mask = idx == i
            k = int(np.sum(mask))
            if k:
                out[mask] = comp.sample(rng, (k,), tilt[mask])
        return out

    def support_geometry(self):
        pts, lin = [], []
        for c in self.components:
            p, l_ = c.support_geometry()
            pts.append(p)
            lin.extend(l_)
        return np.vstack(pts), lin

    def support_metadata(self):
        base = super().support_metadata()
        r_max = max(c.support_metadata().r_max for c in self.components)
        return SupportMeta(base.mean, base.covariance, base.r_min, r_max, self.atoms())

    def atoms(self):
        merged = []
        for w, c in zip(self.weights, self.components):
            for pt, m in c.atoms() or []:
                for i, (q, mq) in enumerate(merged):
                    if np.array_equal(q, pt):
                        merged[i] = (q, mq + w * m)
                        break
                else:
                    merged.append((pt, w * m))
        return merged or None


class OneDimensional(DistributionModel):
    """Law of ``offset + T * direction`` for a scalar ``T``.

    ``T`` is either atomic (``atoms``/``probs``) or Gaussian
    (``gauss_mean``/``gauss_var``).
    """

    kind = "line"

    def __init__(self, direction=(1.0, 0.0), offset=(0.0, 0.0), atoms=None, probs=None,
                 gauss_mean=None, gauss_var=None):
        d = _vec2(direction, "direction")
        if not np.hypot(*d) > 0:
            raise ValueError("direction must be nonzero")
        self.direction = d / np.hypot(*d)
        self.offset = _vec2(offset, "offset")
        if atoms is not None:
            t = np.asarray(atoms, dtype=float).ravel()
            p = _probs(probs)
            if len(t) != len(p):
                raise ValueError("atoms and probs must have equal length")
            self.t_atoms, self.t_probs = t[p > 0], p[p > 0]
            self.gauss = None
        else:
            if gauss_mean is None or gauss_var is None or gauss_var < 0:
                raise ValueError("need atoms/probs or gauss_mean/gauss_var >= 0")
            self.t_atoms = self.t_probs = None
            self.gauss = (float(gauss_mean), float(gauss_var))

    def __repr__(self):
        law = (f"atoms={self.t_atoms.tolist()}, probs={self.t_probs.tolist()}"
               if self.gauss is None else f"gauss={self.gauss}")
        return (f"OneDimensional(direction={self.direction.tolist()}, "
                f"offset={self.offset.tolist()}, {law})")

    def _k1(self, s, order):
        if self.gauss is not None:
            m, v = self.gauss
            return (m * s + 0.5 * v * s * s, m + v * s, np.full_like(s, v))[order]
        z = s[..., None] * self.t_atoms
        if order == 0:
            return _log_mix(z, self.t_probs)
        w = _softmax(z, self.t_probs)
        g = w @ self.t_atoms
        if order == 1:
            return g
        return w @ (self.t_atoms**2) - g * g

    def cumulant(self, u):
        u = _as_u(u)
        return u @ self.offset + self._k1(u @ self.direction, 0)

    def cumulant_gradient(self, u):
        u = _as_u(u)
        return self.offset + self._k1(u @ self.direction, 1)[..., None] * self.direction

    def cumulant_hessian(self, u):
        u = _as_u(u)
        h = self._k1(u @ self.direction, 2)
        return h[..., None, None] * np.outer(self.direction, self.direction)

    def sample(self, rng, size=(), tilt=None):
        tilt, shape = self._tilt_array(size, tilt)
        s = tilt @ self.direction
        if self.gauss is not None:
            m, v = self.gauss
            t = (m + v * s) + np.sqrt(v) * rng.standard_normal(shape)
        else:
            w = _softmax(s[..., None] * self.t_atoms, self.t_probs)
            cum = np.cumsum(w, axis=-1)
            cum[..., -1] = 1.0
            idx = np.sum(cum[..., :-1] <= rng.random(shape)[..., None], axis=-1)
            t = self.t_atoms[idx]
        return self.offset + t[..., None] * self.direction

    def support_geometry(self):
        if self.gauss is not None:
            pt = (self.offset + self.gauss[0] * self.direction)[None]
            return pt, ([self.direction] if self.gauss[1] > 0 else [])
        return self.offset + self.t_atoms[:, None] * self.direction, []

    def atoms(self):
        if self.gauss is not None:
            if self.gauss[1] == 0:
                return [(self.offset + self.gauss[0] * self.direction, 1.0)]
            return None
        return [(self.offset + t * self.direction, float(p))
                for t, p in zip(self.t_atoms, self.t_probs)]


# -- functional surface ----------------------------------------------------

def cumulant(model, u):
    return model.cumulant(u)


def cumulant_gradient(model, u):
    return model.cumulant_gradient(u)


def cumulant_hessian(model, u):
    return model.cumulant_hessian(u)


def sample_increment(model, rng):
    return model.sample(rng, ())


def support_metadata(model) -> SupportMeta:
    return model.support_metadata()


def is_extremal_atom(model, v, tol=1e-12):
    """Mass of ``v`` if it is an extremal atom of conv(supp), else None."""
    v = _vec2(v)
    points, lin = model.support_geometry()
    if lin:
        return None
    for pt, mass in model.atoms() or []:
        if np.all(np.abs(pt - v) <= tol * (1.0 + np.abs(v))) and _is_vertex(points, pt, tol):
            return mass
    return None


def two_atom_line():
    """Two atoms, (1, 0) w.p. 3/4 and (-2, 0) w.p. 1/4."""
    return DiscreteAtoms([(1.0, 0.0), (-2.0, 0.0)], [0.75, 0.25])


def skewed_three_atom_line(probs=(0.35, 0.625, 0.025)):
    """Centred law on the x-axis with atoms -2, 1, 3 and negative third moment."""
    return OneDimensional((1.0, 0.0), (0.0, 0.0), atoms=[-2.0, 1.0, 3.0], probs=probs)


# -- plain-text configuration ---------------------------------------------

HEAVY_TAILED = {"cauchy", "student-t", "student", "t", "lognormal", "pareto",
                "levy", "stable", "laplace-heavy"}


def _floats(key, text, count=None):
    try:
        vals = [float(x) for x in str(text).replace(";", ",").split(",") if x.strip()]
    except ValueError:
        raise ConfigError(key, f"expected comma-separated numbers, got {text!r}") from None
    if count is not None and len(vals) != count:
        raise ConfigError(key, f"expected {count} numbers, got {len(vals)}")
    return vals


def _points(key, text):
    rows = [r for r in str(text).split(";") if r.strip()]
    pts = [_floats(key, r, 2) for r in rows]
    if not pts:
        raise ConfigError(key, "no points given")
    return pts


def _matrix(key, text):
    return np.array(_floats(key, text, 4)).reshape(2, 2)


def parse_distribution(cfg: dict) -> DistributionModel:
    """Build a model from string-valued config keys.

    Keys: ``kind`` (gaussian, atoms, rotinv, mixture, line), ``mu``,
    ``sigma`` (4 numbers, row-major), ``atoms`` (``x,y;x,y`` for kind atoms,
    scalars for kind line), ``probs``, ``radial_law``, ``radius``,
    ``shift``, ``linear_map``, ``direction`` (kind line), and
    ``components`` (``w @ key=value key=value | w @ ...``).
    """
    kind = str(cfg.get("kind", "")).strip().lower()
    if kind in HEAVY_TAILED:
        raise ConfigError("kind", f"{kind!r} has an infinite Laplace transform; not supported")
    try:
        if kind == "gaussian":
            mu = _floats("mu", cfg.get("mu", "0,0"), 2)
            sigma = _matrix("sigma", cfg.get("sigma", "1,0,0,1"))
            return Gaussian(mu, sigma)
        if kind == "atoms":
            if "atoms" not in cfg or "probs" not in cfg:
                raise ConfigError("atoms", "kind=atoms needs atoms and probs")
            return DiscreteAtoms(_points("atoms", cfg["atoms"]), _floats("probs", cfg["probs"]))
        if kind == "rotinv":
            law = str(cfg.get("radial_law", "")).strip()
            if law not in RADIAL_LAWS:
                raise ConfigError("radial_law", f"must be one of {', '.join(RADIAL_LAWS)}")
            radius = _floats("radius", cfg.get("radius", "1"), 1)[0]
            shift = _floats("shift", cfg.get("shift", "0,0"), 2)
            lm = _matrix("linear_map", cfg.get("linear_map", "1,0,0,1"))
            return RotationallyInvariant(law, radius, shift, lm)
        if kind == "line":
            direction = _floats("direction", cfg.get("direction", "1,0"), 2)
            offset = _floats("shift", cfg.get("shift", "0,0"), 2)
            if "atoms" in cfg:
                return OneDimensional(direction, offset, atoms=_floats("atoms", cfg["atoms"]),
                                      probs=_floats("probs", cfg.get("probs", "")))
            mu = _floats("mu", cfg.get("mu", "0"), 1)[0]
            var = _floats("sigma", cfg.get("sigma", "1"), 1)[0]
            return OneDimensional(direction, offset, gauss_mean=mu, gauss_var=var)
        if kind == "mixture":
            return Mixture(_parse_components(cfg.get("components", "")))
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(kind or "kind", str(exc)) from None
    raise ConfigError("kind", f"unknown distribution kind {kind!r}")


def _parse_components(text):
    comps = []
    for chunk in str(text).split("|"):
        if not chunk.strip():
            continue
        if "@" not in chunk:
            raise ConfigError("components", f"component {chunk.strip()!r} lacks 'weight @'")
        w, body = chunk.split("@", 1)
        sub = {}
        for tok in body.split():
            if "=" not in tok:
                raise ConfigError("components", f"bad token {tok!r}")
            k, v = tok.split("=", 1)
            sub[k.strip()] = v.strip()
        comps.append((_floats("components", w, 1)[0], parse_distribution(sub)))
    if not comps:
        raise ConfigError("components", "mixture needs components")
    return comps


def distribution_to_config(model) -> dict:
    """Inverse of :func:`parse_distribution` (string values)."""
    fmt = lambda xs: ",".join(repr(float(x)) for x in np.ravel(xs))  # noqa: E731
    if isinstance(model, Gaussian):
        return {"kind": "gaussian", "mu": fmt(model.mu), "sigma": fmt(model.cov)}
    if isinstance(model, DiscreteAtoms):
        return {"kind": "atoms", "atoms": ";".join(fmt(p) for p in model.points),
                "probs": fmt(model.probs)}
    if isinstance(model, RotationallyInvariant):
        return {"kind": "rotinv", "radial_law": model.radial_law, "radius": fmt([model.radius]),
                "shift": fmt(model.shift), "linear_map": fmt(model.linear_map)}
    if isinstance(model, OneDimensional):
        out = {"kind": "line", "direction": fmt(model.direction), "shift": fmt(model.offset)}
        if model.gauss is None:
            out.update(atoms=fmt(model.t_atoms), probs=fmt(model.t_probs))
        else:
            out.update(mu=fmt([model.gauss[0]]), sigma=fmt([model.gauss[1]]))
        return out
    if isinstance(model, Mixture):
        parts = []
        for w, c in zip(model.weights, model.components):
            sub = distribution_to_config(c)
            parts.append(f"{float(w)!r} @ " + " ".join(f"{k}={v}" for k, v in sub.items()))
        return {"kind": "mixture", "components": " | ".join(parts)}
    raise TypeError(f"cannot serialise {type(model).__name__}")
