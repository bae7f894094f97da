"""Discrete harmonic coordinates.

Each coordinate solves the Laplace equation with boundary data equal to the
hat function of its vertex along the polygon boundary.  The problem is
discretized with continuous piecewise-linear elements on a uniformly refined
fan mesh from the Chebyshev center, and solved by Jacobi-preconditioned
conjugate gradients.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..errors import PointOutside, SolverDiverged
from ..geometry import Polygon, chebyshev_center
from .base import CoordinateField, as_points

ON_BOUNDARY_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class RefinedMesh:
    """Conforming triangle mesh of a polygon.

    The first ``n`` nodes are the polygon vertices.  ``boundary_edge`` holds,
    for boundary nodes, the polygon edge they lie on (-1 for interior nodes)
    and ``boundary_t`` the position along it.
    """

    nodes: np.ndarray
    triangles: np.ndarray
    boundary_flags: np.ndarray
    boundary_edge: np.ndarray
    boundary_t: np.ndarray
    refinement_level: int
    parent_polygon: Polygon
    flips: int = 0

    @property
    def areas(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        a, b = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        return 0.5 * (a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0])

    @property
    def max_edge_length(self) -> float:
        p = self.nodes[self.triangles]
        return float(max(np.linalg.norm(p[:, k] - p[:, (k + 1) % 3], axis=1).max() for k in range(3)))

    def to_json_dict(self) -> dict:
        return {"nodes": self.nodes.tolist(), "triangles": self.triangles.tolist()}


def _split(nodes: np.ndarray, tris: np.ndarray):
    """One round of 4-way refinement through edge midpoints."""
    e = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
    e.sort(axis=1)
    uniq, inv = np.unique(e, axis=0, return_inverse=True)
    inv = inv.reshape(3, -1)
    mids = 0.5 * (nodes[uniq[:, 0]] + nodes[uniq[:, 1]])
    m01, m12, m20 = (len(nodes) + inv[k] for k in range(3))
    a, b, c = tris.T
    new = np.concatenate(
        [
            np.stack([a, m01, m20], 1),
            np.stack([m01, b, m12], 1),
            np.stack([m20, m12, c], 1),
            np.stack([m01, m12, m20], 1),
        ]
    )
    return np.concatenate([nodes, mids]), new


def _boundary_info(p: Polygon, nodes: np.ndarray):
    v = p.vertices
    e = p.edges
    tol = ON_BOUNDARY_TOL * p.diameter
    dist = p.edge_distances(nodes)
    edge = np.full(len(nodes), -1)
    t = np.zeros(len(nodes))
    # first matching edge wins; vertices resolve to t = 0 on their outgoing edge
    for k in range(p.n - 1, -1, -1):
        s = ((nodes - v[k]) @ e[k]) / (e[k] @ e[k])
        on = (np.abs(dist[:, k]) <= tol) & (s >= -1e-12) & (s <= 1 + 1e-12)
        edge[on] = k
        t[on] = np.clip(s[on], 0.0, 1.0)
    return edge >= 0, edge, t


def _opposite_angle_sums(nodes, tris):
    """For every interior edge: (tri a, tri b, local edge ids, sum of opposite angles)."""
    e = np.concatenate([tris[:, [1, 2]], tris[:, [2, 0]], tris[:, [0, 1]]])
    owner = np.tile(np.arange(len(tris)), 3)
    local = np.repeat(np.arange(3), len(tris))
    key = np.sort(e, axis=1)
    order = np.lexsort((key[:, 1], key[:, 0]))
    key, owner, local = key[order], owner[order], local[order]
    same = np.all(key[1:] == key[:-1], axis=1)
    i = np.flatnonzero(same)
    return owner[i], owner[i + 1], local[i], local[i + 1]


def _angle_at(nodes, tris, t, k):
    p = nodes[tris[t]]
    a = p[np.arange(len(t)), (k + 1) % 3] - p[np.arange(len(t)), k]
    b = p[np.arange(len(t)), (k + 2) % 3] - p[np.arange(len(t)), k]
    return np.arctan2(np.abs(a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]), (a * b).sum(1))


def delaunay_flip(nodes: np.ndarray, tris: np.ndarray, max_rounds: int = 1000):
    """Lawson edge flips until every interior edge has opposite angles summing to at most pi.

    That condition makes every off-diagonal stiffness entry non-positive, so
    the discrete solution obeys the maximum principle.
    """
    tris = tris.copy()
    total = 0
    for _ in range(max_rounds):
        ta, tb, la, lb = _opposite_angle_sums(nodes, tris)
        s = _angle_at(nodes, tris, ta, la) + _angle_at(nodes, tris, tb, lb)
        bad = np.flatnonzero(s > math.pi + 1e-10)
        if bad.size == 0:
            return tris, total
        used = np.zeros(len(tris), bool)
        for q in bad[np.argsort(-s[bad], kind="stable")]:
            a, b = ta[q], tb[q]
            if used[a] or used[b]:
                continue
            used[a] = used[b] = True
            pa = tris[a, la[q]]
            pb = tris[b, lb[q]]
            # shared edge is the one opposite pa in triangle a
            u, w = tris[a, (la[q] + 1) % 3], tris[a, (la[q] + 2) % 3]
            tris[a] = (pa, u, pb)
            tris[b] = (pb, w, pa)
            total += 1
    raise RuntimeError("edge flipping did not terminate")


def default_level(p: Polygon, target: float = 0.02) -> int:
    """Smallest level whose mesh edges are at most ``target * diam``."""
    c, _ = chebyshev_center(p)
    longest = max(np.linalg.norm(p.vertices - c, axis=1).max(), np.linalg.norm(p.edges, axis=1).max())
    return max(0, math.ceil(math.log2(longest / (target * p.diameter))))


def refine(p: Polygon, levels: int, delaunay: bool = True) -> RefinedMesh:
    """Fan mesh from the Chebyshev center, refined ``levels`` times.

    With ``delaunay=True`` (default) interior edges are then flipped until the
    mesh is Delaunay, which the maximum principle needs when fan triangles
    are obtuse.  Node positions and triangle count are unaffected.
    """
    if levels < 0:
        raise ValueError("levels must be >= 0")
    c, _ = chebyshev_center(p)
    n = p.n
    nodes = np.concatenate([p.vertices, c[None]])
    tris = np.array([(n, i, (i + 1) % n) for i in range(n)])
    for _ in range(levels):
        nodes, tris = _split(nodes, tris)
    flips = 0
    if delaunay:
        tris, flips = delaunay_flip(nodes, tris)
    flags, edge, t = _boundary_info(p, nodes)
    return RefinedMesh(nodes, tris, flags, edge, t, levels, p, flips)


def stiffness_matrix(mesh: RefinedMesh) -> sp.csr_matrix:
    p = mesh.nodes[mesh.triangles]
    area = mesh.areas
    # hat-function gradients: rotated opposite edges over twice the area
    g = np.empty((len(area), 3, 2))
    for k in range(3):
        e = p[:, (k + 2) % 3] - p[:, (k + 1) % 3]
        g[:, k, 0] = -e[:, 1]
        g[:, k, 1] = e[:, 0]
    g /= (2 * area)[:, None, None]
    local = area[:, None, None] * np.einsum("tik,tjk->tij", g, g)
    rows = np.repeat(mesh.triangles, 3, axis=1).ravel()
    cols = np.tile(mesh.triangles, (1, 3)).ravel()
    N = len(mesh.nodes)
    return sp.coo_matrix((local.ravel(), (rows, cols)), shape=(N, N)).tocsr()


def boundary_values(mesh: RefinedMesh) -> np.ndarray:
    """Hat-function boundary data: one column per polygon vertex."""
    n = mesh.parent_polygon.n
    G = np.zeros((len(mesh.nodes), n))
    idx = np.flatnonzero(mesh.boundary_flags)
    k = mesh.boundary_edge[idx]
    t = mesh.boundary_t[idx]
    G[idx, k] = 1.0 - t
    np.add.at(G, (idx, (k + 1) % n), t)
    return G


def pcg(A: sp.spmatrix, b: np.ndarray, rtol: float = 1e-10, maxiter: int | None = None, x0=None):
    """Jacobi-preconditioned conjugate gradients.

    Stops when ``|r| <= rtol * |b|``.  Returns ``(x, iterations)``.
    """
    n = len(b)
    maxiter = 10 * n if maxiter is None else maxiter
    if not np.any(b):
        return np.zeros(n), 0
    M = sp.diags(1.0 / A.diagonal())
    count = [0]

    def tick(_):
        count[0] += 1

    x, info = spla.cg(A, b, x0=x0, rtol=rtol, atol=0.0, maxiter=maxiter, M=M, callback=tick)
    if info != 0:
        raise SolverDiverged(f"CG did not reach rtol={rtol} in {maxiter} iterations")
    return x, count[0]


@dataclass(frozen=True, eq=False)
class HarmonicBasis:
    mesh: RefinedMesh
    nodal_values: np.ndarray
    energies: np.ndarray
    iterations: tuple = field(default=())


def assemble_and_solve(mesh: RefinedMesh, rtol: float = 1e-12) -> HarmonicBasis:
    K = stiffness_matrix(mesh)
    G = boundary_values(mesh)
    inner = np.flatnonzero(~mesh.boundary_flags)
    bnd = np.flatnonzero(mesh.boundary_flags)
    U = G.copy()
    its = []
    if inner.size:
        Kii = K[inner][:, inner].tocsr()
        rhs = -(K[inner][:, bnd] @ G[bnd])
        for i in range(G.shape[1]):
            U[inner, i], it = pcg(Kii, rhs[:, i], rtol=rtol, maxiter=10 * len(mesh.nodes))
            its.append(it)
    energies = np.einsum("ki,ki->i", U, K @ U)
    return HarmonicBasis(mesh, U, energies, tuple(its))


def dirichlet_energy(mesh: RefinedMesh, nodal: np.ndarray) -> np.ndarray:
    """Energy of piecewise-linear functions given by nodal values (one per column)."""
    K = stiffness_matrix(mesh)
    nodal = np.asarray(nodal, dtype=float)
    return np.einsum("ki,ki->i", nodal.reshape(len(mesh.nodes), -1), K @ nodal.reshape(len(mesh.nodes), -1))


class TriangleLocator:
    """Point location by scanning the triangles listed in a uniform bucket grid."""

    def __init__(self, nodes: np.ndarray, triangles: np.ndarray):
        self.nodes = nodes
        self.triangles = triangles
        corners = nodes[triangles]
        self._origin = corners[:, 0]
        # barycentric maps: lambda_{1,2} = (x - p0) @ M
        e1 = corners[:, 1] - corners[:, 0]
        e2 = corners[:, 2] - corners[:, 0]
        det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
        self._M = np.stack([np.stack([e2[:, 1], -e1[:, 1]], 1), np.stack([-e2[:, 0], e1[:, 0]], 1)], 1) / det[:, None, None]
        lo, hi = nodes.min(0), nodes.max(0)
        self._lo = lo
        g = max(1, int(math.sqrt(len(triangles)) / 2))
        self._g = g
        self._h = np.maximum((hi - lo) / g, 1e-300) * (1 + 1e-12)
        tlo = np.floor((corners.min(1) - lo) / self._h).astype(int).clip(0, g - 1)
        thi = np.floor((corners.max(1) - lo) / self._h).astype(int).clip(0, g - 1)
        cells, owners = [], []
        for t in range(len(triangles)):
            ii, jj = np.meshgrid(np.arange(tlo[t, 0], thi[t, 0] + 1), np.arange(tlo[t, 1], thi[t, 1] + 1))
            cells.append((ii * g + jj).ravel())
            owners.append(np.full(ii.size, t))
        cells = np.concatenate(cells)
        owners = np.concatenate(owners)
        order = np.argsort(cells, kind="stable")
        self._owners = owners[order]
        self._start = np.searchsorted(cells[order], np.arange(g * g + 1))

    def barycentric(self, tri_idx: np.ndarray, pts: np.ndarray) -> np.ndarray:
        l12 = np.einsum("mk,mkj->mj", pts - self._origin[tri_idx], self._M[tri_idx])
        return np.concatenate([1.0 - l12.sum(1, keepdims=True), l12], axis=1)

    def locate(self, pts: np.ndarray, tol: float = 1e-10):
        """Triangle index (-1 if none) and barycentric coordinates per point."""
        pts = as_points(pts)
        cell = np.floor((pts - self._lo) / self._h).astype(int).clip(0, self._g - 1)
        cid = cell[:, 0] * self._g + cell[:, 1]
        out = np.full(len(pts), -1)
        best = np.full(len(pts), -np.inf)
        order = np.argsort(cid, kind="stable")
        sorted_cid = cid[order]
        bounds = np.flatnonzero(np.diff(sorted_cid)) + 1
        for group in np.split(order, bounds):
            if group.size == 0:
                continue
            c = cid[group[0]]
            cand = self._owners[self._start[c] : self._start[c + 1]]
            if cand.size == 0:
                continue
            q = pts[group]
            l12 = np.einsum("ptk,tkj->ptj", q[:, None, :] - self._origin[cand][None], self._M[cand])
            lmin = np.minimum(1.0 - l12.sum(-1), l12.min(-1))
            k = lmin.argmax(axis=1)
            val = lmin[np.arange(len(group)), k]
            out[group] = cand[k]
            best[group] = val
        out[best < -tol] = -1
        bary = np.zeros((len(pts), 3))
        ok = out >= 0
        if ok.any():
            bary[ok] = self.barycentric(out[ok], pts[ok])
        return out, bary


class HarmonicCoordinates(CoordinateField):
    name = "harmonic"

    def __init__(self, polygon: Polygon, level: int | None = None, basis: HarmonicBasis | None = None):
        super().__init__(polygon)
        if basis is None:
            level = default_level(polygon) if level is None else level
            basis = assemble_and_solve(refine(polygon, level))
        self.basis = basis
        mesh = basis.mesh
        self.locator = TriangleLocator(mesh.nodes, mesh.triangles)
        # per-triangle constant gradient of each coordinate: (T, n, 2)
        p = mesh.nodes[mesh.triangles]
        g = np.empty((len(p), 3, 2))
        for k in range(3):
            e = p[:, (k + 2) % 3] - p[:, (k + 1) % 3]
            g[:, k] = np.stack([-e[:, 1], e[:, 0]], 1)
        g /= (2 * mesh.areas)[:, None, None]
        self._tri_grads = np.einsum("tkn,tkd->tnd", basis.nodal_values[mesh.triangles], g)

    @property
    def level(self) -> int:
        return self.basis.mesh.refinement_level

    def evaluate(self, points):
        pts = as_points(points)
        self._check_inside(pts)
        tri, bary = self.locator.locate(pts)
        if np.any(tri < 0):
            bad = pts[np.flatnonzero(tri < 0)[0]]
            raise PointOutside(f"point {bad.tolist()} not found in the mesh")
        U = self.basis.nodal_values[self.basis.mesh.triangles[tri]]
        vals = np.einsum("mk,mkn->mn", bary, U)
        return vals, self._tri_grads[tri]


def harmonic_eval(basis: HarmonicBasis, x):
    return HarmonicCoordinates(basis.mesh.parent_polygon, basis=basis).eval(x)
