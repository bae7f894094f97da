"""Composite degree-5 triangle quadrature over polygons."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, NamedTuple

import numpy as np

from .errors import NonFiniteValue
from .geometry import Polygon, chebyshev_center

MAX_REFINEMENT = 8

_S15 = math.sqrt(15.0)
_A = (6.0 - _S15) / 21.0
_B = (6.0 + _S15) / 21.0
# seven-point symmetric rule, exact for total degree <= 5
RULE_BARY = np.array(
    [
        [1 / 3, 1 / 3, 1 / 3],
        [_A, _A, 1 - 2 * _A],
        [_A, 1 - 2 * _A, _A],
        [1 - 2 * _A, _A, _A],
        [_B, _B, 1 - 2 * _B],
        [_B, 1 - 2 * _B, _B],
        [1 - 2 * _B, _B, _B],
    ]
)
RULE_WEIGHTS = np.array([9 / 40] + [(155 - _S15) / 1200] * 3 + [(155 + _S15) / 1200] * 3)
RULE_DEGREE = 5


@lru_cache(maxsize=16)
def _reference_split(k: int) -> np.ndarray:
    """The k*k sub-triangles of the unit right triangle, as (k*k, 3, 2) corners."""
    out = []
    for i in range(k):
        for j in range(k - i):
            out.append([(i, j), (i + 1, j), (i, j + 1)])
            if i + j <= k - 2:
                out.append([(i + 1, j), (i + 1, j + 1), (i, j + 1)])
    return np.array(out, dtype=float) / k


def subdivide(cells: np.ndarray, k: int) -> np.ndarray:
    """Split every triangle of ``cells`` (T, 3, 2) into ``k*k`` similar pieces."""
    cells = np.asarray(cells, dtype=float)
    if k == 1:
        return cells
    ref = _reference_split(k)
    a = cells[:, 0]
    e1 = cells[:, 1] - a
    e2 = cells[:, 2] - a
    out = a[:, None, None, :] + ref[None, ..., 0:1] * e1[:, None, None, :] + ref[None, ..., 1:2] * e2[:, None, None, :]
    return out.reshape(-1, 3, 2)


def _signed_areas(cells: np.ndarray) -> np.ndarray:
    e1 = cells[:, 1] - cells[:, 0]
    e2 = cells[:, 2] - cells[:, 0]
    return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])


@dataclass(frozen=True, eq=False)
class QuadratureScheme:
    """Base triangles, a subdivision count per edge, and the 7-point rule.

    ``refinement = k`` splits each base triangle into ``k*k`` congruent pieces.
    """

    base_cells: np.ndarray
    refinement: int = 1
    min_refinement: int = 1

    def __post_init__(self):
        cells = np.array(self.base_cells, dtype=float).reshape(-1, 3, 2)
        area = _signed_areas(cells)
        # orient every cell positively so the weights come out positive
        flip = area < 0
        cells[flip] = cells[flip][:, [0, 2, 1]]
        cells.setflags(write=False)
        object.__setattr__(self, "base_cells", cells)
        if self.refinement < 1:
            raise ValueError("refinement must be >= 1")

    @classmethod
    def fan(cls, p: Polygon, refinement: int = 1, min_refinement: int = 1) -> "QuadratureScheme":
        c, _ = chebyshev_center(p)
        v = p.vertices
        cells = np.stack([np.broadcast_to(c, v.shape), v, np.roll(v, -1, axis=0)], axis=1)
        return cls(cells, max(refinement, min_refinement), min_refinement)

    def with_refinement(self, k: int) -> "QuadratureScheme":
        return QuadratureScheme(self.base_cells, k, self.min_refinement)

    @property
    def area(self) -> float:
        return float(_signed_areas(self.base_cells).sum())

    def points_weights(self) -> tuple[np.ndarray, np.ndarray]:
        cells = subdivide(self.base_cells, self.refinement)
        pts = np.einsum("qk,tkd->tqd", RULE_BARY, cells).reshape(-1, 2)
        w = (_signed_areas(cells)[:, None] * RULE_WEIGHTS[None, :]).ravel()
        return pts, w


class QuadratureResult(NamedTuple):
    value: np.ndarray | float
    refinement: int
    converged: bool

    def __float__(self):
        return float(self.value)


def _apply(q: QuadratureScheme, f) -> np.ndarray | float:
    pts, w = q.points_weights()
    vals = np.asarray(f(pts), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise NonFiniteValue("integrand is not finite at a quadrature point")
    if vals.ndim == 1:
        return float(w @ vals)
    return w @ vals.reshape(len(w), -1)


def integrate(q: QuadratureScheme, f: Callable[[np.ndarray], np.ndarray], adaptive: bool = True) -> QuadratureResult:
    """Integrate ``f`` (vectorized over ``(m, 2)`` points) over the scheme's cells.

    ``f`` may return ``(m,)`` or ``(m, k)``; in the latter case the ``k``
    integrals are computed together and all must settle.  With ``adaptive``
    the refinement is doubled until two successive values differ by less
    than ``max(1e-10, 1e-8 * |value|)``, stopping at ``MAX_REFINEMENT``.
    """
    prev = _apply(q, f)
    k = q.refinement
    if not adaptive:
        return QuadratureResult(prev, k, True)
    while 2 * k <= MAX_REFINEMENT:
        k *= 2
        cur = _apply(q.with_refinement(k), f)
        if np.all(np.abs(np.asarray(cur) - prev) < np.maximum(1e-10, 1e-8 * np.abs(cur))):
            return QuadratureResult(cur, k, True)
        prev = cur
    return QuadratureResult(prev, k, False)
