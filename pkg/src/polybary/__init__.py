"""Generalized barycentric coordinates on convex polygons.

Four families share one interface: piecewise-linear triangulation
coordinates, Wachspress, Sibson and discrete harmonic coordinates.  The
``analysis`` module measures their interpolation errors.
"""
from .coordinates import FAMILIES, CoordinateField, make_field
from .geometry import Polygon, load_polygon, measure, validate_polygon

__version__ = "0.1.0"

__all__ = ["FAMILIES", "CoordinateField", "Polygon", "load_polygon", "make_field", "measure", "validate_polygon"]
