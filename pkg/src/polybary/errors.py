"""Exception hierarchy shared by all polybary modules."""


class PolybaryError(Exception):
    """Base class for every error raised by this package."""


class PolygonError(PolybaryError, ValueError):
    """Raw vertex data does not describe an acceptable polygon."""


class TooFewVertices(PolygonError):
    pass


class TooManyVertices(PolygonError):
    pass


class DegenerateEdge(PolygonError):
    """Repeated vertices or three consecutive collinear vertices."""


class NonConvex(PolygonError):
    pass


class InvalidThresholds(PolybaryError, ValueError):
    pass


class ApexOutside(PolybaryError, ValueError):
    pass


class DegenerateTriangle(PolybaryError, ValueError):
    pass


class PointOutside(PolybaryError, ValueError):
    """A query point lies outside the closed polygon."""


class DuplicatePoints(PolybaryError, ValueError):
    pass


class AtVertex(PolybaryError, ValueError):
    """Gradient requested at a polygon vertex, where it does not exist."""


class SolverDiverged(PolybaryError, RuntimeError):
    pass


class NonFiniteValue(PolybaryError, FloatingPointError):
    pass


class MissingGradient(PolybaryError, ValueError):
    pass


class ConditionsNotMet(PolybaryError, ValueError):
    """The polygon fails the shape conditions a bound audit relies on."""
