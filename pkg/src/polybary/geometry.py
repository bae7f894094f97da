"""Convex polygons, shape measurements and shape-regularity conditions.

Polygons are stored counter-clockwise as an ``(n, 2)`` float array.  All
measurements are pure functions of the vertex array.  The five shape
conditions are always evaluated on the diameter-1 copy of a polygon.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import (
    ApexOutside,
    DegenerateEdge,
    InvalidThresholds,
    NonConvex,
    PolygonError,
    TooFewVertices,
    TooManyVertices,
)

MAX_VERTICES = 64
CONVEXITY_TOL = 1e-12


class Point2(NamedTuple):
    x: float
    y: float


def _cross(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def _pairwise_max_distance(pts: np.ndarray) -> float:
    diff = pts[:, None, :] - pts[None, :, :]
    return float(np.sqrt((diff**2).sum(-1)).max())


@dataclass(frozen=True, eq=False)
class Polygon:
    """A validated, strictly convex, counter-clockwise polygon.

    Build instances with :func:`validate_polygon`; the constructor does not
    check anything.
    """

    vertices: np.ndarray

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float)
        v.flags.writeable = False
        object.__setattr__(self, "vertices", v)

    @property
    def n(self) -> int:
        return len(self.vertices)

    def vertex(self, i: int) -> np.ndarray:
        return self.vertices[i % self.n]

    @property
    def edges(self) -> np.ndarray:
        """Edge vectors ``v[i+1] - v[i]``."""
        return np.roll(self.vertices, -1, axis=0) - self.vertices

    @property
    def area(self) -> float:
        v = self.vertices
        return 0.5 * float(_cross(v, np.roll(v, -1, axis=0)).sum())

    @property
    def perimeter(self) -> float:
        return float(np.linalg.norm(self.edges, axis=1).sum())

    @property
    def diameter(self) -> float:
        return _pairwise_max_distance(self.vertices)

    def inward_normals(self) -> np.ndarray:
        e = self.edges
        nrm = np.stack([-e[:, 1], e[:, 0]], axis=1)
        return nrm / np.linalg.norm(e, axis=1)[:, None]

    def edge_distances(self, points) -> np.ndarray:
        """Signed distances of ``points`` to every edge line, positive inside.

        Returns an array of shape ``(m, n)``.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        nrm = self.inward_normals()
        return np.einsum("mnk,nk->mn", pts[:, None, :] - self.vertices[None, :, :], nrm)

    def boundary_distance(self, points) -> np.ndarray:
        """Signed distance to the boundary (positive inside) for convex polygons."""
        return self.edge_distances(points).min(axis=1)

    def contains(self, points, tol: float = 1e-12) -> np.ndarray:
        """Closed-polygon membership with absolute slack ``tol * diameter``."""
        return self.boundary_distance(points) >= -tol * self.diameter

    def transformed(self, scale: float = 1.0, angle: float = 0.0, shift=(0.0, 0.0)) -> "Polygon":
        """Image under ``x -> scale * R(angle) x + shift`` (vertex order kept)."""
        return Polygon(similarity(self.vertices, scale, angle, shift))

    def rescaled(self) -> "Polygon":
        """Copy with diameter 1 (vertex 0 kept fixed)."""
        v0 = self.vertices[0]
        return Polygon(v0 + (self.vertices - v0) / self.diameter)

    def to_json(self) -> str:
        return json.dumps({"vertices": self.vertices.tolist()})


def similarity(points, scale: float = 1.0, angle: float = 0.0, shift=(0.0, 0.0)) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    rot = np.array([[c, -s], [s, c]])
    return scale * np.asarray(points, dtype=float) @ rot.T + np.asarray(shift, dtype=float)


def validate_polygon(raw_vertices: Sequence) -> Polygon:
    """Check raw vertex data and return a counter-clockwise :class:`Polygon`.

    Clockwise input is reversed, keeping the first vertex at index 0, so
    vertex ``i`` of clockwise input becomes vertex ``-i mod n``.  A vertex
    whose turn (cross product of the adjacent edges) is below
    ``1e-12 * diam**2`` counts as collinear.
    """
    try:
        v = np.asarray(raw_vertices, dtype=float)
    except (TypeError, ValueError) as exc:
        raise PolygonError(f"cannot read vertices: {exc}") from None
    if v.ndim != 2 or v.shape[1] != 2:
        raise PolygonError(f"expected a list of (x, y) pairs, got shape {v.shape}")
    n = len(v)
    if n < 3:
        raise TooFewVertices(f"need at least 3 vertices, got {n}")
    if n > MAX_VERTICES:
        raise TooManyVertices(f"at most {MAX_VERTICES} vertices supported, got {n}")
    if not np.all(np.isfinite(v)):
        raise PolygonError("vertex coordinates must be finite")

    diam = _pairwise_max_distance(v)
    if diam == 0.0:
        raise DegenerateEdge("all vertices coincide")
    d = np.sqrt(((v[:, None, :] - v[None, :, :]) ** 2).sum(-1))
    d[np.diag_indices(n)] = np.inf
    if d.min() <= CONVEXITY_TOL * diam:
        i, j = np.unravel_index(np.argmin(d), d.shape)
        raise DegenerateEdge(f"vertices {i} and {j} coincide")

    if 0.5 * _cross(v, np.roll(v, -1, axis=0)).sum() < 0:
        # reverse but keep the first vertex first
        v = np.roll(v[::-1], 1, axis=0)

    prev = v - np.roll(v, 1, axis=0)
    nxt = np.roll(v, -1, axis=0) - v
    turn = _cross(prev, nxt)
    tol = CONVEXITY_TOL * diam**2
    flat = np.flatnonzero(np.abs(turn) <= tol)
    if flat.size:
        raise DegenerateEdge(f"collinear vertices around index {int(flat[0])}")
    if np.any(turn < 0):
        raise NonConvex(f"reflex vertex at index {int(np.flatnonzero(turn < 0)[0])}")
    # every turn is a left turn; a simple polygon winds exactly once
    winding = np.arctan2(turn, (prev * nxt).sum(1)).sum()
    if not math.isclose(winding, 2 * math.pi, abs_tol=1e-6):
        raise NonConvex("vertex sequence winds more than once")
    return Polygon(v)


def load_polygon(path) -> Polygon:
    """Read ``{"vertices": [[x, y], ...]}`` from a JSON file."""
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, dict) or "vertices" not in data:
        raise PolygonError(f"{path}: expected an object with a 'vertices' list")
    return validate_polygon(data["vertices"])


# ---------------------------------------------------------------------------
# measurements


def interior_angles(p: Polygon) -> np.ndarray:
    v = p.vertices
    a = np.roll(v, 1, axis=0) - v
    b = np.roll(v, -1, axis=0) - v
    return np.arctan2(np.abs(_cross(a, b)), (a * b).sum(1))


def chebyshev_center(p: Polygon) -> tuple[np.ndarray, float]:
    """Center and radius of the largest inscribed circle.

    Every triple of edge lines determines a point at equal signed distance
    ``r`` from the three lines; the feasible triple with the largest ``r`` wins.
    Ties are broken by the lexicographically smallest center.
    """
    nrm = p.inward_normals()
    off = (nrm * p.vertices).sum(1)
    combos = np.array(list(itertools.combinations(range(p.n), 3)))
    mats = np.concatenate([nrm[combos], -np.ones(combos.shape + (1,))], axis=2)
    rhs = off[combos]
    det = np.linalg.det(mats)
    ok = np.abs(det) > 1e-14
    sol = np.linalg.solve(mats[ok], rhs[ok][..., None])[..., 0]
    centers, radii = sol[:, :2], sol[:, 2]
    dist = centers @ nrm.T - off
    tol = 1e-12 * p.diameter
    feasible = (dist.min(axis=1) >= radii - tol) & (radii > 0)
    centers, radii = centers[feasible], radii[feasible]
    rmax = radii.max()
    best = centers[radii >= rmax - tol]
    key = np.round(best / (1e-9 * p.diameter))
    order = np.lexsort((key[:, 1], key[:, 0]))
    return best[order[0]].copy(), float(rmax)


def min_enclosing_circle(points) -> tuple[np.ndarray, float]:
    """Smallest enclosing circle by enumerating pair and triple candidates."""
    pts = np.asarray(points, dtype=float)
    m = len(pts)
    cands = []
    for i, j in itertools.combinations(range(m), 2):
        cands.append(((pts[i] + pts[j]) / 2, np.linalg.norm(pts[i] - pts[j]) / 2))
    for i, j, k in itertools.combinations(range(m), 3):
        a, b, c = pts[i], pts[j], pts[k]
        d = 2 * _cross(b - a, c - a)
        if abs(d) < 1e-15:
            continue
        ba, ca = b - a, c - a
        ux = (ca[1] * (ba @ ba) - ba[1] * (ca @ ca)) / d
        uy = (ba[0] * (ca @ ca) - ca[0] * (ba @ ba)) / d
        cen = a + np.array([ux, uy])
        cands.append((cen, float(np.hypot(ux, uy))))
    cands.sort(key=lambda t: t[1])
    for cen, r in cands:
        if np.all(np.linalg.norm(pts - cen, axis=1) <= r * (1 + 1e-12) + 1e-15):
            return cen, r
    raise RuntimeError("no enclosing circle found")  # unreachable for m >= 2


@dataclass(frozen=True)
class GeometryReport:
    diameter: float
    inradius: float
    incenter: tuple
    aspect_ratio: float
    interior_angles: tuple
    min_edge: float
    min_vertex_separation: float
    max_angle: float
    min_angle: float
    vertex_count: int
    area: float
    perimeter: float


def measure(p: Polygon) -> GeometryReport:
    diam = p.diameter
    center, rho = chebyshev_center(p)
    ang = interior_angles(p)
    d = np.sqrt(((p.vertices[:, None] - p.vertices[None]) ** 2).sum(-1))
    d[np.diag_indices(p.n)] = np.inf
    return GeometryReport(
        diameter=diam,
        inradius=rho,
        incenter=(float(center[0]), float(center[1])),
        aspect_ratio=diam / rho,
        interior_angles=tuple(float(a) for a in ang),
        min_edge=float(np.linalg.norm(p.edges, axis=1).min()),
        min_vertex_separation=float(d.min()),
        max_angle=float(ang.max()),
        min_angle=float(ang.min()),
        vertex_count=p.n,
        area=p.area,
        perimeter=p.perimeter,
    )


# ---------------------------------------------------------------------------
# shape conditions


@dataclass(frozen=True)
class ConditionThresholds:
    """Bounds for the five shape conditions (lengths at diameter 1)."""

    gamma_star: float
    d_star: float
    beta_star_max: float
    beta_star_min: float
    n_star: int

    def __post_init__(self):
        vals = (self.gamma_star, self.d_star, self.beta_star_max, self.beta_star_min)
        if not all(math.isfinite(x) for x in vals):
            raise InvalidThresholds("thresholds must be finite")
        if self.gamma_star < 2:
            raise InvalidThresholds(f"gamma_star must be >= 2, got {self.gamma_star}")
        if self.d_star <= 0:
            raise InvalidThresholds(f"d_star must be positive, got {self.d_star}")
        if not 0 < self.beta_star_min < self.beta_star_max < math.pi:
            raise InvalidThresholds(
                "need 0 < beta_star_min < beta_star_max < pi, got "
                f"{self.beta_star_min}, {self.beta_star_max}"
            )
        if int(self.n_star) != self.n_star or self.n_star < 3:
            raise InvalidThresholds(f"n_star must be an integer >= 3, got {self.n_star}")

    @classmethod
    def from_partial(cls, gamma_star, d_star, beta_star_max, beta_star_min=None, n_star=None):
        """Fill the two implied thresholds from the first three.

        A missing minimum angle defaults to ``2 asin(1/gamma_star)`` and a
        missing vertex bound to the smaller of the two vertex-count bounds
        implied by the edge and angle conditions.
        """
        if beta_star_min is None:
            beta_star_min = 2 * math.asin(1 / gamma_star) if gamma_star >= 2 else float("nan")
        if n_star is None:
            by_edge = (math.sqrt(2) + d_star) ** 2 / d_star**2 if d_star > 0 else math.inf
            by_angle = 2 * math.pi / (math.pi - beta_star_max) + 1
            n_star = max(3, math.ceil(min(by_edge, by_angle)))
        return cls(gamma_star, d_star, beta_star_max, beta_star_min, int(n_star))


def check_conditions(r: GeometryReport, t: ConditionThresholds) -> dict:
    """Pass/fail of G1..G5.  Lengths are normalized by ``r.diameter`` first."""
    return {
        "G1": bool(r.aspect_ratio < t.gamma_star),
        "G2": bool(r.min_vertex_separation / r.diameter > t.d_star),
        "G3": bool(r.max_angle < t.beta_star_max),
        "G4": bool(r.min_angle > t.beta_star_min),
        "G5": bool(r.vertex_count < t.n_star),
    }


def check_polygon(p: Polygon, t: ConditionThresholds) -> dict:
    return check_conditions(measure(p.rescaled()), t)


@dataclass(frozen=True)
class BoundConstants:
    B_star: float
    w_star: float
    h_star: float
    D_star: float
    wach_grad_bound: float
    sibs_grad_bound: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def derived_bound_constants(t: ConditionThresholds) -> BoundConstants:
    """Lower bounds on areas and the resulting uniform gradient bounds."""
    if not isinstance(t, ConditionThresholds):
        raise InvalidThresholds("expected ConditionThresholds")
    B = t.d_star**2 * math.sin(t.beta_star_min / 2) * math.cos(t.beta_star_max / 2)
    w = B * (t.d_star**2 * math.sin(math.pi - t.beta_star_max) / 4) ** (t.n_star - 2)
    h = t.d_star / (2 * t.gamma_star * (1 + t.d_star))
    D = min(t.beta_star_min * h**2 / 8, math.pi * h**2 / 32, t.beta_star_min * h**2 / 32)
    if not (B > 0 and w > 0 and D > 0):
        raise InvalidThresholds("thresholds give a non-positive area bound")
    return BoundConstants(
        B_star=B,
        w_star=w,
        h_star=h,
        D_star=D,
        wach_grad_bound=math.pi**2 / (2 * w),
        sibs_grad_bound=(1 + math.pi) / D,
    )


def fan_triangulation(p: Polygon, apex) -> np.ndarray:
    """Triangles ``(apex, v_i, v_{i+1})`` as an ``(n, 3, 2)`` array."""
    apex = np.asarray(apex, dtype=float)
    if p.boundary_distance(apex)[0] <= 1e-12 * p.diameter:
        raise ApexOutside(f"apex {apex.tolist()} is not strictly inside the polygon")
    v = p.vertices
    return np.stack([np.broadcast_to(apex, v.shape), v, np.roll(v, -1, axis=0)], axis=1)


def triangle_angles(tri) -> np.ndarray:
    """Angles of a ``(..., 3, 2)`` triangle array, one per corner."""
    tri = np.asarray(tri, dtype=float)
    out = []
    for k in range(3):
        a = tri[..., (k + 1) % 3, :] - tri[..., k, :]
        b = tri[..., (k + 2) % 3, :] - tri[..., k, :]
        out.append(np.arctan2(np.abs(_cross(a, b)), (a * b).sum(-1)))
    return np.stack(out, axis=-1)


# ---------------------------------------------------------------------------
# sample polygons


def regular_polygon(n: int, diameter: float = 1.0) -> Polygon:
    """Regular n-gon centered at the origin with the given diameter."""
    th = 2 * np.pi * np.arange(n) / n + np.pi / 2
    pts = np.c_[np.cos(th), np.sin(th)]
    return validate_polygon(pts * diameter / _pairwise_max_distance(pts))


def pentagon_eps(eps: float) -> Polygon:
    """The near-square pentagon with apex ``(0, 1 + eps)``."""
    return validate_polygon([(0.0, 1.0 + eps), (1.0, 1.0), (1.0, -1.0), (-1.0, -1.0), (-1.0, 1.0)])


def random_convex_polygon(rng: np.random.Generator, n: int, min_gap: float = 0.35) -> Polygon:
    """Random strictly convex n-gon inscribed in a rotated, stretched ellipse.

    Angular gaps between consecutive vertices are at least ``min_gap`` times
    the uniform gap, which keeps interior angles away from pi.
    """
    base = 2 * np.pi / n
    gaps = min_gap * base + rng.dirichlet(np.ones(n)) * (2 * np.pi - n * min_gap * base)
    th = rng.uniform(0, 2 * np.pi) + np.cumsum(gaps)
    pts = np.c_[np.cos(th), rng.uniform(0.5, 1.0) * np.sin(th)]
    pts = similarity(pts, rng.uniform(0.5, 2.0), rng.uniform(0, 2 * np.pi), rng.uniform(-1, 1, 2))
    return validate_polygon(pts)


def obtuse_hexagon(max_angle_deg: float = 175.0) -> Polygon:
    """Regular pentagon with one edge bent outward at its midpoint.

    The inserted vertex gets interior angle ``max_angle_deg``; the other
    angles stay near 108 degrees, so only the maximum-angle condition is
    stressed.
    """
    v = regular_polygon(5).vertices
    a, b = v[0], v[1]
    e = b - a
    outward = np.array([e[1], -e[0]]) / np.linalg.norm(e)
    s = 0.5 * np.linalg.norm(e) * math.tan(math.radians(180.0 - max_angle_deg) / 2)
    apex = 0.5 * (a + b) + s * outward
    return validate_polygon(np.vstack([a, apex, v[1:]]))
