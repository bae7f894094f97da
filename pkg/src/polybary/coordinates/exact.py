"""Closed-form coordinates: triangle, triangulation and Wachspress."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DegenerateTriangle, PointOutside
from ..geometry import Polygon
from .base import CoordinateField, CoordSample, as_points


def triangle_barycentric(tri, x):
    """Barycentric coordinates of ``x`` in ``tri`` and their constant gradients.

    ``x`` may be a single point or an ``(m, 2)`` array; values come back with
    shape ``(3,)`` or ``(m, 3)``.  Gradients are always ``(3, 2)``.
    """
    t = np.asarray(tri, dtype=float)
    a, b, c = t
    det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])
    scale = max(np.ptp(t[:, 0]), np.ptp(t[:, 1]))
    if abs(det) <= 1e-14 * scale**2:
        raise DegenerateTriangle("triangle has (near) zero area")
    # gradient of lambda_k is the rotated opposite edge over twice the area
    grads = np.array([[b[1] - c[1], c[0] - b[0]], [c[1] - a[1], a[0] - c[0]], [a[1] - b[1], b[0] - a[0]]]) / det
    xs = np.asarray(x, dtype=float)
    # lambda_k is affine and equals 1 at corner k
    lam = np.stack([(xs - t[k]) @ grads[k] + 1.0 for k in range(3)], axis=-1)
    return lam, grads


@dataclass(frozen=True)
class Triangulation:
    """Triangles over polygon vertex indices, each positively oriented."""

    triangles: tuple

    @classmethod
    def from_indices(cls, p: Polygon, triangles) -> "Triangulation":
        out = []
        v = p.vertices
        for tri in triangles:
            i, j, k = (int(s) % p.n for s in tri)
            a, b, c = v[i], v[j], v[k]
            det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])
            if det == 0:
                raise DegenerateTriangle(f"triangle {(i, j, k)} is degenerate")
            out.append((i, j, k) if det > 0 else (i, k, j))
        return cls(tuple(out))

    @classmethod
    def fan(cls, p: Polygon, apex: int) -> "Triangulation":
        """Fan of all diagonals from vertex ``apex``."""
        n = p.n
        tris = [(apex % n, (apex + k) % n, (apex + k + 1) % n) for k in range(1, n - 1)]
        return cls.from_indices(p, tris)

    def __len__(self):
        return len(self.triangles)


def extremal_triangulations(p: Polygon, i: int) -> tuple[Triangulation, Triangulation]:
    """``(T_m, T_M)`` for vertex ``i``.

    ``T_m`` is the fan from ``v[i+1]`` and so contains the diagonal
    ``v[i-1] v[i+1]``; ``T_M`` is the fan from ``v[i]`` itself.
    """
    return Triangulation.fan(p, i + 1), Triangulation.fan(p, i)


class TriangulationCoordinates(CoordinateField):
    """Piecewise-linear hat functions over a triangulation of the polygon.

    On an edge shared by two triangles the gradient is taken from the
    triangle whose sorted index triple is lexicographically smallest.
    """

    name = "tri"

    def __init__(self, polygon: Polygon, triangulation: Triangulation | None = None):
        super().__init__(polygon)
        if triangulation is None:
            triangulation = Triangulation.fan(polygon, 0)
        self.triangulation = triangulation
        order = sorted(range(len(triangulation)), key=lambda k: tuple(sorted(triangulation.triangles[k])))
        self._tris = np.array([triangulation.triangles[k] for k in order], dtype=int)
        corners = polygon.vertices[self._tris]
        self._grads = np.empty((len(self._tris), 3, 2))
        for k, tri in enumerate(corners):
            self._grads[k] = triangle_barycentric(tri, tri[0])[1]
        self._corners = corners

    def locate(self, pts: np.ndarray, tol: float = 1e-12) -> tuple[np.ndarray, np.ndarray]:
        """Index of the containing triangle and local coordinates per point."""
        rel = pts[:, None, :] - self._corners[None, :, 0, :]
        lam12 = np.einsum("mtk,tjk->mtj", rel, self._grads[:, 1:, :])
        lam = np.concatenate([1.0 - lam12.sum(-1, keepdims=True), lam12], axis=-1)
        inside = lam.min(axis=-1) >= -tol
        if not np.all(inside.any(axis=1)):
            bad = pts[np.flatnonzero(~inside.any(axis=1))[0]]
            raise PointOutside(f"point {bad.tolist()} is outside the polygon")
        k = inside.argmax(axis=1)
        return k, lam[np.arange(len(pts)), k]

    def evaluate(self, points):
        pts = as_points(points)
        k, lam = self.locate(pts)
        m = len(pts)
        vals = np.zeros((m, self.n))
        grads = np.zeros((m, self.n, 2))
        idx = self._tris[k]
        rows = np.arange(m)[:, None]
        vals[rows, idx] = lam
        grads[rows, idx] = self._grads[k]
        return vals, grads


def triangulation_coords(p: Polygon, t: Triangulation, x) -> CoordSample:
    return TriangulationCoordinates(p, t).eval(x)


# ---------------------------------------------------------------------------
# Wachspress


@dataclass(frozen=True)
class WachspressCache:
    """Per-polygon constants: corner areas ``B`` and the constant ``grad A_j``."""

    B: np.ndarray
    edge_normals: np.ndarray

    @classmethod
    def build(cls, p: Polygon) -> "WachspressCache":
        v = p.vertices
        prev, nxt = np.roll(v, 1, axis=0), np.roll(v, -1, axis=0)
        B = 0.5 * ((v[:, 0] - prev[:, 0]) * (nxt[:, 1] - prev[:, 1]) - (nxt[:, 0] - prev[:, 0]) * (v[:, 1] - prev[:, 1]))
        e = nxt - v
        # A_j(x) = area(x, v_j, v_{j+1}) is affine; its gradient is half the inward-rotated edge
        grad_a = 0.5 * np.stack([-e[:, 1], e[:, 0]], axis=1)
        return cls(B, grad_a)


def _areas(p: Polygon, pts: np.ndarray) -> np.ndarray:
    v = p.vertices
    a = v[None, :, :] - pts[:, None, :]
    b = np.roll(v, -1, axis=0)[None, :, :] - pts[:, None, :]
    return 0.5 * (a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0])


class WachspressCoordinates(CoordinateField):
    """Rational coordinates ``w_i / sum_j w_j`` with ``w_i = B_i prod A_j``.

    The product for ``w_i`` runs over the ``n - 2`` edges not incident to
    vertex ``i``; written out this way the weights stay finite and the
    denominator positive on the whole closed polygon.
    """

    name = "wachspress"

    def __init__(self, polygon: Polygon):
        super().__init__(polygon)
        self.cache = WachspressCache.build(polygon)

    def internals(self, points) -> dict:
        pts = as_points(points)
        A = _areas(self.polygon, pts)
        w, _ = self._weights(A)
        return {"A": A, "B": self.cache.B.copy(), "w": w}

    def _weights(self, A: np.ndarray):
        m, n = A.shape
        gA = self.cache.edge_normals
        w = np.empty((m, n))
        gw = np.empty((m, n, 2))
        for i in range(n):
            # edges i+1, ..., i-2 (cyclic): everything except i-1 and i
            run = (i + 1 + np.arange(n - 2)) % n
            f = A[:, run]
            pre = np.cumprod(np.concatenate([np.ones((m, 1)), f[:, :-1]], axis=1), axis=1)
            suf = np.cumprod(np.concatenate([np.ones((m, 1)), f[:, :0:-1]], axis=1), axis=1)[:, ::-1]
            others = pre * suf
            w[:, i] = self.cache.B[i] * pre[:, -1] * f[:, -1]
            gw[:, i] = self.cache.B[i] * others @ gA[run]
        return w, gw

    def evaluate(self, points):
        pts = as_points(points)
        self._check_inside(pts)
        A = _areas(self.polygon, pts)
        w, gw = self._weights(A)
        s = w.sum(axis=1, keepdims=True)
        gs = gw.sum(axis=1, keepdims=True)
        lam = w / s
        grad = (gw - lam[..., None] * gs) / s[..., None]
        return lam, grad


def wachspress(p: Polygon, x) -> CoordSample:
    return WachspressCoordinates(p).eval(x)


def wachspress_internals(p: Polygon, x) -> dict:
    """Signed areas ``A_j(x)``, corner areas ``B_i`` and weights ``w_i(x)``."""
    field = WachspressCoordinates(p)
    pts = as_points(x)
    field._check_inside(pts)
    out = field.internals(pts)
    if np.ndim(x) == 1:
        out["A"], out["w"] = out["A"][0], out["w"][0]
    return out
