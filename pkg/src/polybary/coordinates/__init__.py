"""Coordinate families sharing the :class:`CoordinateField` interface."""
from .base import CoordinateField, CoordSample
from .exact import (
    Triangulation,
    TriangulationCoordinates,
    WachspressCache,
    WachspressCoordinates,
    extremal_triangulations,
    triangle_barycentric,
    triangulation_coords,
    wachspress,
    wachspress_internals,
)
from .harmonic import HarmonicBasis, HarmonicCoordinates, RefinedMesh, assemble_and_solve, harmonic_eval, refine
from .sibson import ConvexCell, SibsonBreakdown, SibsonCoordinates, clip_halfplane, sibson, sibson_gradients, voronoi_cell

FAMILIES = ("tri", "wachspress", "sibson", "harmonic")

__all__ = [
    "FAMILIES",
    "ConvexCell",
    "CoordSample",
    "CoordinateField",
    "HarmonicBasis",
    "HarmonicCoordinates",
    "RefinedMesh",
    "SibsonBreakdown",
    "SibsonCoordinates",
    "Triangulation",
    "TriangulationCoordinates",
    "WachspressCache",
    "WachspressCoordinates",
    "assemble_and_solve",
    "clip_halfplane",
    "extremal_triangulations",
    "harmonic_eval",
    "make_field",
    "refine",
    "sibson",
    "sibson_gradients",
    "triangle_barycentric",
    "triangulation_coords",
    "voronoi_cell",
    "wachspress",
    "wachspress_internals",
]


def make_field(family: str, polygon, **kwargs) -> CoordinateField:
    """Build the coordinate field called ``family`` on ``polygon``."""
    if family == "tri":
        return TriangulationCoordinates(polygon, kwargs.get("triangulation"))
    if family == "wachspress":
        return WachspressCoordinates(polygon)
    if family == "sibson":
        return SibsonCoordinates(polygon)
    if family == "harmonic":
        return HarmonicCoordinates(polygon, level=kwargs.get("level"))
    raise ValueError(f"unknown family {family!r}; choose from {', '.join(FAMILIES)}")
