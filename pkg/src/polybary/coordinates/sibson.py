"""Sibson (natural neighbor) coordinates by convex half-plane clipping.

Cells are clipped independently for each query point; there is no global
Voronoi structure.  By default the Voronoi cells are the ordinary planar
ones: for an interior point ``x`` its cell in the vertex set plus ``x`` is
bounded, and the overlap ratios reproduce linear functions exactly.  With
``clip_to_domain=True`` every cell is additionally intersected with the
polygon.  That variant gives the cell areas ``C_i``, ``D(x)`` and facet
lengths ``F_j`` that the lower-bound estimates are stated for, but it is not
linearly precise near the boundary, so it is only used for auditing those
quantities.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import AtVertex, DuplicatePoints, PointOutside
from ..geometry import Polygon
from .base import CoordinateField, as_points

BOUNDARY_TOL = 1e-12  # relative to diameter
_BOX = -1  # label of the initial bounding-box edges


def _clip(xs, ys, labels, nx, ny, c, label):
    """Keep ``nx*x + ny*y <= c``.  ``labels[k]`` tags the edge leaving vertex k."""
    m = len(xs)
    if m == 0:
        return xs, ys, labels
    f = [nx * xs[k] + ny * ys[k] - c for k in range(m)]
    if max(f) <= 0.0:
        return xs, ys, labels
    if min(f) > 0.0:
        return [], [], []
    ox, oy, ol = [], [], []
    for k in range(m):
        k1 = k + 1 if k + 1 < m else 0
        fp, fq = f[k], f[k1]
        if fp <= 0.0:
            ox.append(xs[k])
            oy.append(ys[k])
            ol.append(labels[k])
            if fq > 0.0:
                t = fp / (fp - fq)
                ox.append(xs[k] + t * (xs[k1] - xs[k]))
                oy.append(ys[k] + t * (ys[k1] - ys[k]))
                ol.append(label)
        elif fq <= 0.0:
            t = fp / (fp - fq)
            ox.append(xs[k] + t * (xs[k1] - xs[k]))
            oy.append(ys[k] + t * (ys[k1] - ys[k]))
            ol.append(labels[k])
    return ox, oy, ol


def _area(xs, ys):
    m = len(xs)
    s = 0.0
    for k in range(m):
        k1 = k + 1 if k + 1 < m else 0
        s += xs[k] * ys[k1] - xs[k1] * ys[k]
    return 0.5 * s


@dataclass(frozen=True)
class ConvexCell:
    """Counter-clockwise convex polygon, possibly empty."""

    vertices: np.ndarray

    @property
    def area(self) -> float:
        v = self.vertices
        if len(v) < 3:
            return 0.0
        return _area(list(v[:, 0]), list(v[:, 1]))

    @property
    def is_empty(self) -> bool:
        return self.area <= 0.0


def _as_cell(cell) -> ConvexCell:
    if isinstance(cell, ConvexCell):
        return cell
    if isinstance(cell, Polygon):
        return ConvexCell(np.array(cell.vertices))
    return ConvexCell(np.asarray(cell, dtype=float).reshape(-1, 2))


def clip_halfplane(cell, a, b) -> ConvexCell:
    """Part of ``cell`` at least as close to ``a`` as to ``b``."""
    cell = _as_cell(cell)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.array_equal(a, b):
        raise DuplicatePoints("bisector of a point with itself")
    nx, ny = b - a
    c = 0.5 * (b @ b - a @ a)
    v = cell.vertices
    xs, ys, _ = _clip(list(v[:, 0]), list(v[:, 1]), [0] * len(v), nx, ny, c, 0)
    return ConvexCell(np.c_[xs, ys] if xs else np.zeros((0, 2)))


def voronoi_cell(points, k: int, domain) -> ConvexCell:
    """Voronoi cell of ``points[k]`` intersected with the convex ``domain``."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    uniq = np.unique(pts, axis=0)
    if len(uniq) != len(pts):
        raise DuplicatePoints("Voronoi sites must be distinct")
    cell = _as_cell(domain)
    for j in range(len(pts)):
        if j != k:
            cell = clip_halfplane(cell, pts[k], pts[j])
            if len(cell.vertices) == 0:
                break
    return cell


@dataclass(frozen=True)
class SibsonBreakdown:
    """Areas and facet data behind one Sibson evaluation.

    ``C`` are the Voronoi cell areas of the vertices restricted to the
    polygon.  ``D``, ``overlaps``, ``F`` and ``facet_midpoints`` describe the
    cell of the query point (restricted or not, per ``clipped``).
    """

    C: np.ndarray
    D: float
    overlaps: np.ndarray
    F: np.ndarray
    facet_midpoints: np.ndarray
    clipped: bool


class SibsonCoordinates(CoordinateField):
    name = "sibson"

    def __init__(self, polygon: Polygon, clip_to_domain: bool = False):
        super().__init__(polygon)
        self.clip_to_domain = clip_to_domain
        self._diam = polygon.diameter
        v = polygon.vertices
        self._vx = [float(a) for a in v[:, 0]]
        self._vy = [float(a) for a in v[:, 1]]
        self._C = None

    @property
    def vertex_cell_areas(self) -> np.ndarray:
        if self._C is None:
            v = self.polygon.vertices
            self._C = np.array([voronoi_cell(v, i, self.polygon).area for i in range(self.n)])
        return self._C

    def _special(self, x: np.ndarray):
        """Values at vertices and on edges, where the cell of x degenerates."""
        v = self.polygon.vertices
        tol = BOUNDARY_TOL * self._diam
        dv = np.hypot(*(v - x).T)
        if dv.min() <= tol:
            vals = np.zeros(self.n)
            vals[int(dv.argmin())] = 1.0
            return vals
        if self.clip_to_domain:
            return None
        dist = self.polygon.edge_distances(x)[0]
        k = int(dist.argmin())
        if dist[k] > tol:
            return None
        a, b = v[k], v[(k + 1) % self.n]
        t = float(np.clip((x - a) @ (b - a) / ((b - a) @ (b - a)), 0.0, 1.0))
        vals = np.zeros(self.n)
        vals[k] = 1.0 - t
        vals[(k + 1) % self.n] = t
        return vals

    def _cell_of(self, x: np.ndarray):
        """Cell of x in coordinates relative to x, with edge labels."""
        px, py = float(x[0]), float(x[1])
        vx = [a - px for a in self._vx]
        vy = [a - py for a in self._vy]
        if self.clip_to_domain:
            xs, ys = vx[:], vy[:]
            labels = [_BOX] * self.n
        else:
            delta = float(self.polygon.boundary_distance(x)[0])
            # the cell lies within diam**2 / (2 delta) of x
            r = self._diam**2 / delta + self._diam
            xs, ys, labels = [-r, r, r, -r], [-r, -r, r, r], [_BOX] * 4
        for j in range(self.n):
            xs, ys, labels = _clip(xs, ys, labels, vx[j], vy[j], 0.5 * (vx[j] ** 2 + vy[j] ** 2), j)
        if not self.clip_to_domain and _BOX in labels:
            raise RuntimeError("cell of an interior point reached the bounding box")
        return xs, ys, labels, vx, vy

    def breakdown(self, x) -> SibsonBreakdown:
        x = np.asarray(x, dtype=float).reshape(2)
        self._check_inside(x[None])
        v = self.polygon.vertices
        if np.hypot(*(v - x).T).min() <= BOUNDARY_TOL * self._diam:
            raise DuplicatePoints("query point coincides with a vertex")
        if not self.clip_to_domain and self._special(x) is not None:
            raise PointOutside("unclipped cell is unbounded for boundary points")
        xs, ys, labels, vx, vy = self._cell_of(x)
        F, mids, overlaps = self._facets_and_overlaps(xs, ys, labels, vx, vy)
        mids = mids + x
        return SibsonBreakdown(self.vertex_cell_areas, _area(xs, ys), overlaps, F, mids, self.clip_to_domain)

    def _facets_and_overlaps(self, xs, ys, labels, vx, vy):
        n = self.n
        m = len(xs)
        F = np.zeros(n)
        mids = np.zeros((n, 2))
        for k in range(m):
            j = labels[k]
            if j < 0:
                continue
            k1 = k + 1 if k + 1 < m else 0
            length = math.hypot(xs[k1] - xs[k], ys[k1] - ys[k])
            if length > 0.0:
                mids[j] = (F[j] * mids[j] + length * 0.5 * np.array([xs[k] + xs[k1], ys[k] + ys[k1]])) / (F[j] + length)
                F[j] += length
        overlaps = np.zeros(n)
        for i in np.flatnonzero(F > 0.0):
            cx, cy, cl = xs, ys, labels
            for j in range(n):
                if j == i:
                    continue
                nx, ny = vx[j] - vx[i], vy[j] - vy[i]
                c = 0.5 * (vx[j] ** 2 + vy[j] ** 2 - vx[i] ** 2 - vy[i] ** 2)
                cx, cy, cl = _clip(cx, cy, cl, nx, ny, c, -2)
            overlaps[i] = _area(cx, cy) if cx else 0.0
        return F, mids, overlaps

    def _one(self, x: np.ndarray):
        special = self._special(x)
        if special is not None:
            return special, np.full((self.n, 2), np.nan)
        xs, ys, labels, vx, vy = self._cell_of(x)
        F, mids, overlaps = self._facets_and_overlaps(xs, ys, labels, vx, vy)
        D = overlaps.sum()
        # moving x shifts the facet shared with v_j; the area rate of the
        # facet point y is (y - x) / |v_j - x|, integrated along the facet
        dist = np.hypot(np.array(vx), np.array(vy))
        g_over = (F / dist)[:, None] * mids
        g_D = g_over.sum(axis=0)
        vals = overlaps / D
        grads = (g_over * D - overlaps[:, None] * g_D) / D**2
        return vals, grads

    def evaluate(self, points):
        pts = as_points(points)
        self._check_inside(pts)
        vals = np.empty((len(pts), self.n))
        grads = np.empty((len(pts), self.n, 2))
        for k, x in enumerate(pts):
            vals[k], grads[k] = self._one(x)
        return vals, grads


def sibson(p: Polygon, x, breakdown: bool = False, clip_to_domain: bool = False):
    """Sibson coordinates at ``x``; with ``breakdown=True`` also the area data."""
    field = SibsonCoordinates(p, clip_to_domain=clip_to_domain)
    sample = field.eval(x)
    if breakdown:
        return sample, field.breakdown(x)
    return sample


def sibson_gradients(breakdown: SibsonBreakdown, p: Polygon, x) -> np.ndarray:
    """Coordinate gradients from the facet data of a breakdown.

    ``grad (D cap C_i) = F_i (m_i - x) / |v_i - x|`` with ``m_i`` the facet
    midpoint, ``grad D`` is their sum, and the quotient rule does the rest.
    """
    x = np.asarray(x, dtype=float).reshape(2)
    dist = np.linalg.norm(p.vertices - x, axis=1)
    if dist.min() <= BOUNDARY_TOL * p.diameter:
        raise AtVertex(f"gradient undefined at vertex {int(dist.argmin())}")
    g_over = (breakdown.F / dist)[:, None] * (breakdown.facet_midpoints - x)
    g_over[breakdown.F == 0.0] = 0.0
    g_D = g_over.sum(axis=0)
    D = breakdown.D
    return (g_over * D - breakdown.overlaps[:, None] * g_D) / D**2


def delaunay_circles(p: Polygon) -> list[tuple[np.ndarray, float]]:
    """Empty circumcircles through three or more polygon vertices.

    These are where Sibson coordinates lose smoothness, so derivative checks
    keep away from them.
    """
    v = p.vertices
    n = p.n
    out = []
    seen = []
    for i in range(n):
        for j in range(i + 1, n):
            for k in range(j + 1, n):
                a, b, c = v[i], v[j], v[k]
                ba, ca = b - a, c - a
                d = 2 * (ba[0] * ca[1] - ba[1] * ca[0])
                if abs(d) < 1e-15:
                    continue
                ux = (ca[1] * (ba @ ba) - ba[1] * (ca @ ca)) / d
                uy = (ba[0] * (ca @ ca) - ca[0] * (ba @ ba)) / d
                cen = a + np.array([ux, uy])
                r = math.hypot(ux, uy)
                if np.all(np.linalg.norm(v - cen, axis=1) >= r * (1 - 1e-9)):
                    if not any(np.allclose(cen, c2) and math.isclose(r, r2) for c2, r2 in seen):
                        seen.append((cen, r))
                        out.append((cen, r))
    return out
