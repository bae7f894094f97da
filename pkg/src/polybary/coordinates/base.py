from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from ..errors import PointOutside
from ..geometry import Polygon


@dataclass(frozen=True)
class CoordSample:
    """Coordinates and their gradients at one point.

    ``values`` has shape ``(n,)`` and ``gradients`` shape ``(n, 2)``.
    """

    values: np.ndarray
    gradients: np.ndarray


class CoordinateField(ABC):
    """A family of barycentric coordinates on one polygon.

    Subclasses implement :meth:`evaluate`, which is vectorized over query
    points; :meth:`eval` is the single-point convenience wrapper.
    """

    name = "abstract"

    def __init__(self, polygon: Polygon):
        self.polygon = polygon

    @property
    def n(self) -> int:
        return self.polygon.n

    @abstractmethod
    def evaluate(self, points) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(values (m, n), gradients (m, n, 2))`` at ``points (m, 2)``."""

    def eval(self, x) -> CoordSample:
        vals, grads = self.evaluate(np.asarray(x, dtype=float).reshape(1, 2))
        return CoordSample(vals[0], grads[0])

    def values(self, points) -> np.ndarray:
        return self.evaluate(points)[0]

    def _check_inside(self, pts: np.ndarray, tol: float = 1e-10) -> None:
        inside = self.polygon.contains(pts, tol)
        if not np.all(inside):
            bad = pts[np.flatnonzero(~inside)[0]]
            raise PointOutside(f"point {bad.tolist()} is outside the polygon")


def as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    return pts.reshape(-1, 2)
