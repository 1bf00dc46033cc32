"""Planar convex hulls and the hull functionals used for random walks.

Hulls are built with Andrew's monotone chain. A forward turn whose cross
product is within ``1e-12 * scale**2`` counts as straight and its middle
point is dropped, so hulls keep only extreme points. Following the
convention for walk hulls, the perimeter of a segment is its doubled
length.

The single-hull routines and the batched kernels used by the Monte Carlo
code share one compiled chain implementation.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba as nb
import numpy as np

__all__ = [
    "Hull2D",
    "Polyline",
    "convex_hull",
    "perimeter",
    "area",
    "diameter",
    "width",
    "cauchy_perimeter",
    "mean_width",
    "polyline_length",
    "hull_perimeter_area",
    "COLLINEAR_EPS",
]

COLLINEAR_EPS = 1e-12


@nb.njit(cache=True, nogil=True)
def _turns_right(xs, ys, o, a, b, eps):
    """True when o -> a -> b turns clockwise, or runs straight on with a
    cross product within ``eps`` (so ``a`` is a redundant middle point)."""
    ax, ay = xs[a] - xs[o], ys[a] - ys[o]
    bx, by = xs[b] - xs[a], ys[b] - ys[a]
    c = ax * by - ay * bx
    if c <= 0.0:
        return True
    # a hairpin (b doubling back past a) is never treated as straight
    return c <= eps and ax * bx + ay * by > 0.0


@nb.njit(cache=True, nogil=True)
def _chain(xs, ys):
    """Indices of hull vertices in counter-clockwise order."""
    m = xs.shape[0]
    order = np.argsort(xs, kind="mergesort")
    # lexicographic order: break ties in x by y
    i = 0
    while i < m:
        j = i + 1
        while j < m and xs[order[j]] == xs[order[i]]:
            j += 1
        for a in range(i + 1, j):
            key = order[a]
            b = a - 1
            while b >= i and ys[order[b]] > ys[key]:
                order[b + 1] = order[b]
                b -= 1
            order[b + 1] = key
        i = j
    if m == 1:
        out = np.empty(1, np.int64)
        out[0] = order[0]
        return out

    scale = 0.0
    for k in range(m):
        scale = max(scale, abs(xs[k]), abs(ys[k]))
    eps = COLLINEAR_EPS * scale * scale

    hull = np.empty(2 * m + 1, np.int64)
    h = 0
    for k in range(m):
        p = order[k]
        while h >= 2 and _turns_right(xs, ys, hull[h - 2], hull[h - 1], p, eps):
            h -= 1
        hull[h] = p
        h += 1
    lower_end = h + 1
    for k in range(m - 2, -1, -1):
        p = order[k]
        while h >= lower_end and _turns_right(xs, ys, hull[h - 2], hull[h - 1], p, eps):
            h -= 1
        hull[h] = p
        h += 1
    return hull[: h - 1].copy()


@nb.njit(cache=True, nogil=True)
def _closed_length_area(xs, ys, idx):
    k = idx.shape[0]
    per = 0.0
    twice_area = 0.0
    x0 = xs[idx[0]]
    y0 = ys[idx[0]]
    for i in range(k):
        a = idx[i]
        b = idx[(i + 1) % k]
        per += np.hypot(xs[b] - xs[a], ys[b] - ys[a])
        twice_area += (xs[a] - x0) * (ys[b] - y0) - (xs[b] - x0) * (ys[a] - y0)
    return per, 0.5 * abs(twice_area)


@nb.njit(cache=True, nogil=True)
def _batch_hull(paths, with_origin):
    t_count, n = paths.shape[0], paths.shape[1]
    off = 1 if with_origin else 0
    per = np.empty(t_count)
    ar = np.empty(t_count)
    xs = np.zeros(n + off)
    ys = np.zeros(n + off)
    for t in range(t_count):
        for k in range(n):
            xs[k + off] = paths[t, k, 0]
            ys[k + off] = paths[t, k, 1]
        idx = _chain(xs, ys)
        per[t], ar[t] = _closed_length_area(xs, ys, idx)
    return per, ar


def hull_perimeter_area(paths, with_origin=True):
    """Perimeter and area of the hull of each path in a batch.

    Parameters
    ----------
    paths : array_like, shape (trials, n, 2)
        Partial sums ``S_1..S_n`` of each walk.
    with_origin : bool
        Include the origin, giving the hull ``conv(0, S_1, ..., S_n)``.

    Returns
    -------
    perimeter, area : ndarray, shape (trials,)
    """
    arr = np.ascontiguousarray(paths, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[None]
    return _batch_hull(arr, with_origin)


@dataclass(frozen=True)
class Hull2D:
    """Extreme points of a planar convex hull, counter-clockwise."""

    vertices: np.ndarray
    degeneracy: str  # "full", "segment" or "point"

    def __len__(self):
        return len(self.vertices)


@dataclass(frozen=True)
class Polyline:
    """An ordered chain of planar points."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) == 0:
            raise ValueError("a polyline needs at least one 2-vector")
        if not np.all(np.isfinite(pts)):
            raise ValueError("polyline coordinates must be finite")
        object.__setattr__(self, "points", pts)


def convex_hull(points) -> Hull2D:
    """Convex hull of a finite planar point set."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) == 0:
        raise ValueError("convex_hull needs at least one point")
    xs = np.ascontiguousarray(pts[:, 0])
    ys = np.ascontiguousarray(pts[:, 1])
    verts = pts[_chain(xs, ys)]
    # exact duplicates can survive when every point coincides
    keep = [0]
    for i in range(1, len(verts)):
        if not np.array_equal(verts[i], verts[keep[-1]]):
            keep.append(i)
    if len(keep) > 1 and np.array_equal(verts[keep[-1]], verts[keep[0]]):
        keep.pop()
    verts = verts[keep]
    kind = {1: "point", 2: "segment"}.get(len(verts), "full")
    return Hull2D(verts, kind)


def perimeter(hull: Hull2D) -> float:
    v = hull.vertices
    if hull.degeneracy == "point":
        return 0.0
    if hull.degeneracy == "segment":
        return 2.0 * float(np.hypot(*(v[1] - v[0])))
    d = np.roll(v, -1, axis=0) - v
    return float(np.sum(np.hypot(d[:, 0], d[:, 1])))


def area(hull: Hull2D) -> float:
    if hull.degeneracy != "full":
        return 0.0
    v = hull.vertices - hull.vertices[0]
    x, y = v[:, 0], v[:, 1]
    return 0.5 * abs(float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)))


def diameter(hull: Hull2D) -> float:
    v = hull.vertices
    diff = v[:, None, :] - v[None, :, :]
    return float(np.sqrt(np.max(np.sum(diff**2, axis=-1))))


def width(hull: Hull2D, theta):
    """Width of the hull along direction angle(s) ``theta``."""
    theta = np.asarray(theta, dtype=float)
    proj = hull.vertices @ np.stack([np.cos(theta), np.sin(theta)])
    return proj.max(axis=0) - proj.min(axis=0)


def cauchy_perimeter(hull: Hull2D, directions: int = 10_000) -> float:
    """Perimeter from widths: half the integral of the width over the circle.

    Uses the midpoint rule with ``directions`` equally spaced angles.
    """
    if directions < 4:
        raise ValueError("need at least 4 directions")
    theta = (np.arange(directions) + 0.5) * (2.0 * np.pi / directions)
    return 0.5 * float(np.sum(width(hull, theta))) * (2.0 * np.pi / directions)


def mean_width(hull: Hull2D, directions: int = 10_000) -> float:
    """Direction-averaged width; equals perimeter / pi in the plane."""
    return cauchy_perimeter(hull, directions) / np.pi


def polyline_length(path) -> float:
    """Total length of a polyline, accumulated segment by segment."""
    pts = path.points if isinstance(path, Polyline) else np.asarray(path, dtype=float)
    if len(pts) < 2:
        return 0.0
    d = np.diff(pts, axis=0)
    # cumsum accumulates sequentially (np.sum would reorder)
    return float(np.cumsum(np.hypot(d[:, 0], d[:, 1]))[-1])
