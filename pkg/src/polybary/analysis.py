"""Interpolation errors, convergence rates, bound audits and the pentagon study."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.stats import qmc

from .coordinates import make_field
from .coordinates.base import CoordinateField, as_points
from .coordinates.exact import TriangulationCoordinates, WachspressCoordinates
from .coordinates.harmonic import HarmonicCoordinates, assemble_and_solve, default_level, refine
from .coordinates.sibson import SibsonCoordinates
from .errors import ConditionsNotMet, MissingGradient
from .geometry import (
    ConditionThresholds,
    Polygon,
    check_polygon,
    derived_bound_constants,
    pentagon_eps,
    similarity,
    validate_polygon,
)
from .quadrature import QuadratureScheme, integrate

SIBSON_MIN_REFINEMENT = 4


# ---------------------------------------------------------------------------
# scalar fields


class ScalarField:
    """A function on the plane with optional gradient and second derivatives.

    ``hessian`` returns ``(u_xx, u_xy, u_yy)`` per point.
    """

    def __init__(self, value: Callable, gradient: Callable | None = None, hessian: Callable | None = None):
        self._value = value
        self._gradient = gradient
        self._hessian = hessian

    @property
    def has_gradient(self) -> bool:
        return self._gradient is not None

    @property
    def has_hessian(self) -> bool:
        return self._hessian is not None

    def value(self, points) -> np.ndarray:
        return np.asarray(self._value(as_points(points)), dtype=float)

    def gradient(self, points) -> np.ndarray:
        if self._gradient is None:
            raise MissingGradient("field has no gradient")
        return np.asarray(self._gradient(as_points(points)), dtype=float)

    def hessian(self, points) -> np.ndarray:
        if self._hessian is None:
            raise MissingGradient("field has no second derivatives")
        return np.asarray(self._hessian(as_points(points)), dtype=float)

    def value_and_gradient(self, points) -> tuple[np.ndarray, np.ndarray]:
        return self.value(points), self.gradient(points)


def polynomial2(a=0.0, b=0.0, c=0.0, d=0.0, e=0.0, f=0.0) -> ScalarField:
    """``a x^2 + b x y + c y^2 + d x + e y + f``."""

    def val(p):
        x, y = p[:, 0], p[:, 1]
        return a * x * x + b * x * y + c * y * y + d * x + e * y + f

    def grad(p):
        x, y = p[:, 0], p[:, 1]
        return np.stack([2 * a * x + b * y + d, b * x + 2 * c * y + e], axis=1)

    def hess(p):
        return np.tile([2.0 * a, b, 2.0 * c], (len(p), 1))

    return ScalarField(val, grad, hess)


def linear(d=0.0, e=0.0, f=0.0) -> ScalarField:
    return polynomial2(d=d, e=e, f=f)


class Interpolant(ScalarField):
    """``I u = sum_i u(v_i) lambda_i`` for one coordinate family."""

    def __init__(self, family: CoordinateField, nodal: np.ndarray):
        self.family = family
        self.nodal = np.asarray(nodal, dtype=float)
        super().__init__(lambda p: self.value_and_gradient(p)[0], lambda p: self.value_and_gradient(p)[1])

    def value_and_gradient(self, points):
        lam, grad = self.family.evaluate(as_points(points))
        return lam @ self.nodal, np.einsum("mnd,n->md", grad, self.nodal)


def interpolate(family: CoordinateField, u: ScalarField, p: Polygon | None = None) -> Interpolant:
    p = family.polygon if p is None else p
    return Interpolant(family, u.value(p.vertices))


# ---------------------------------------------------------------------------
# error norms


@dataclass
class StudyRecord:
    parameter: float
    l2_error: float
    h1_semi_error: float
    h1_error: float
    h2_seminorm_u: float
    fitted_rate: float | None = None
    quad_converged: bool = True


def h2_seminorm(u: ScalarField, q: QuadratureScheme) -> float:
    """``sqrt(int u_xx^2 + u_xy^2 + u_yy^2)``, one term per second-order multi-index."""
    res = integrate(q, lambda pts: (u.hessian(pts) ** 2).sum(axis=1))
    return math.sqrt(max(float(res.value), 0.0))


def sobolev_errors(
    u: ScalarField, Iu: ScalarField, p: Polygon, q: QuadratureScheme | None = None, parameter: float = math.nan, adaptive: bool = True
) -> StudyRecord:
    """L2, H1-seminorm and H1 norms of ``u - Iu`` over the scheme's cells."""
    if not (u.has_gradient and Iu.has_gradient):
        raise MissingGradient("both fields need gradients for the H1 error")
    q = QuadratureScheme.fan(p) if q is None else q

    def integrand(pts):
        uv, ug = u.value_and_gradient(pts)
        iv, ig = Iu.value_and_gradient(pts)
        return np.stack([(uv - iv) ** 2, ((ug - ig) ** 2).sum(axis=1)], axis=1)

    res = integrate(q, integrand, adaptive=adaptive)
    l2sq, semisq = (max(float(s), 0.0) for s in res.value)
    h2 = h2_seminorm(u, q) if u.has_hessian else math.nan
    return StudyRecord(
        parameter=float(parameter),
        l2_error=math.sqrt(l2sq),
        h1_semi_error=math.sqrt(semisq),
        h1_error=math.sqrt(l2sq + semisq),
        h2_seminorm_u=h2,
        quad_converged=bool(res.converged),
    )


def family_quadrature(fam: CoordinateField) -> tuple[QuadratureScheme, bool]:
    """Quadrature cells suited to a family, and whether to refine adaptively.

    Piecewise-linear families integrate over their own triangles, where the
    integrands are polynomials of degree <= 4 and the rule is exact.
    """
    p = fam.polygon
    if isinstance(fam, TriangulationCoordinates):
        return QuadratureScheme(p.vertices[fam._tris]), False
    if isinstance(fam, HarmonicCoordinates):
        mesh = fam.basis.mesh
        return QuadratureScheme(mesh.nodes[mesh.triangles]), False
    if isinstance(fam, SibsonCoordinates):
        return QuadratureScheme.fan(p, min_refinement=SIBSON_MIN_REFINEMENT), True
    return QuadratureScheme.fan(p), True


def fit_rate(params: Sequence[float], errors: Sequence[float]) -> float | None:
    """Least-squares slope of log(error) against log(parameter).

    Entries at rounding level are dropped; ``None`` if fewer than two remain.
    """
    params = np.asarray(params, dtype=float)
    errors = np.asarray(errors, dtype=float)
    keep = errors > 10 * np.finfo(float).eps
    if keep.sum() < 2:
        return None
    return float(np.polyfit(np.log(params[keep]), np.log(errors[keep]), 1)[0])


@dataclass
class ConvergenceResult:
    family: str
    records: list
    h1_rate: float | None
    h1_semi_rate: float | None
    l2_rate: float | None
    rate_fit_skipped: bool

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "records": [asdict(r) for r in self.records],
            "h1_rate": self.h1_rate,
            "h1_semi_rate": self.h1_semi_rate,
            "l2_rate": self.l2_rate,
            "rate_fit_skipped": self.rate_fit_skipped,
        }


def build_family(kind: str, p: Polygon, harmonic_level: int | None = None) -> CoordinateField:
    if kind == "harmonic":
        level = default_level(p) if harmonic_level is None else harmonic_level
        return HarmonicCoordinates(p, basis=assemble_and_solve(refine(p, level)))
    return make_field(kind, p)


def convergence_study(
    kind: str, base: Polygon, u: ScalarField, scales: Sequence[float], harmonic_level: int | None = None
) -> ConvergenceResult:
    """Interpolation errors of ``u`` on ``h * base`` for each scale ``h``.

    ``base`` is first rescaled to diameter 1.  Rates are fitted to errors
    divided by ``|u|_{H^2(h base)}``, which is the form of the optimal
    estimate: for quadratic ``u`` the normalized H1 error is then
    proportional to ``h`` and the L2 error to ``h^2``.
    """
    scales = sorted((float(s) for s in scales), reverse=True)
    unit = base.rescaled()
    records = []
    for h in scales:
        p = validate_polygon(similarity(unit.vertices, scale=h))
        fam = build_family(kind, p, harmonic_level)
        q, adaptive = family_quadrature(fam)
        records.append(sobolev_errors(u, interpolate(fam, u, p), p, q, parameter=h, adaptive=adaptive))
    h2 = np.array([r.h2_seminorm_u for r in records])
    skipped = not np.all(h2 > 0)
    rates = {}
    for name in ("h1_error", "h1_semi_error", "l2_error"):
        err = np.array([getattr(r, name) for r in records])
        rates[name] = None if skipped else fit_rate(scales, err / h2)
    skipped = skipped or rates["h1_error"] is None
    if records:
        records[-1].fitted_rate = rates["h1_error"]
    return ConvergenceResult(kind, records, rates["h1_error"], rates["h1_semi_error"], rates["l2_error"], skipped)


# ---------------------------------------------------------------------------
# the near-square pentagon


def pentagon_cells(eps: float, first: float = 0.25) -> np.ndarray:
    """Triangles covering the pentagon, graded toward the line ``y = 1``.

    The Wachspress gradient varies on a length scale ``eps`` just below the
    top vertex, so the strips under it have geometrically growing heights
    starting at ``first * eps``.
    """
    cells = [[(-1.0, 1.0), (1.0, 1.0), (0.0, 1.0 + eps)]]
    ys = [1.0]
    d = first * eps
    while 1.0 - d > -1.0:
        ys.append(1.0 - d)
        d *= 2.0
    ys.append(-1.0)
    for top, bot in zip(ys[:-1], ys[1:]):
        cells.append([(-1.0, bot), (1.0, bot), (1.0, top)])
        cells.append([(-1.0, bot), (1.0, top), (-1.0, top)])
    return np.array(cells)


def dy_lambda1_closed_form(eps: float, pts) -> np.ndarray:
    pts = as_points(pts)
    x, y = pts[:, 0], pts[:, 1]
    s = 1 - x * x
    num = 4 * eps * s + 4 * eps**2 * s + eps**3 * s * s
    return num / (eps**2 * s + 4 * eps + 2 * (1 - y)) ** 2


def lambda1_closed_form(eps: float, pts) -> np.ndarray:
    pts = as_points(pts)
    x, y = pts[:, 0], pts[:, 1]
    return eps * (1 - x * x) * (1 + y) / (eps**2 * (1 - x * x) + 4 * eps + 2 * (1 - y))


def top_region_grid(eps: float, m: int = 50) -> np.ndarray:
    """``m x m`` points of the pentagon with ``1/4 <= x <= 3/4`` and ``y >= 1``.

    Columns run from ``y = 1`` up to the top edge at each ``x``.
    """
    xs = np.linspace(0.25, 0.75, m)
    t = np.linspace(0.0, 1.0, m)
    X, T = np.meshgrid(xs, t, indexing="ij")
    Y = 1.0 + eps * (1.0 - X) * T
    return np.c_[X.ravel(), Y.ravel()]


@dataclass
class PentagonRecord:
    eps: float
    energy: float
    quad_converged: bool
    min_pointwise: float
    pointwise_bound: float
    pointwise_pass: bool


@dataclass
class CounterexampleResult:
    records: list
    slope: float | None
    increasing: bool

    @property
    def passed(self) -> bool:
        return bool(self.increasing and self.slope is not None and self.slope <= -0.9 and all(r.pointwise_pass for r in self.records))

    def to_dict(self) -> dict:
        return {
            "records": [asdict(r) for r in self.records],
            "slope": self.slope,
            "increasing": self.increasing,
            "pass": self.passed,
        }


def pentagon_energy(eps: float):
    """``int |d lambda_1 / dy|^2`` of the Wachspress coordinate at the apex."""
    p = pentagon_eps(eps)
    fam = WachspressCoordinates(p)
    q = QuadratureScheme(pentagon_cells(eps))
    return integrate(q, lambda pts: fam.evaluate(pts)[1][:, 0, 1] ** 2)


def counterexample_study(eps_list: Sequence[float], grid: int = 50) -> CounterexampleResult:
    """Growth of the Wachspress gradient energy on the pentagon as eps shrinks."""
    eps_list = sorted((float(e) for e in eps_list), reverse=True)
    records = []
    for eps in eps_list:
        res = pentagon_energy(eps)
        fam = WachspressCoordinates(pentagon_eps(eps))
        g = np.abs(fam.evaluate(top_region_grid(eps, grid))[1][:, 0, 1])
        bound = 1.0 / (28.0 * eps)
        records.append(PentagonRecord(eps, float(res.value), bool(res.converged), float(g.min()), bound, bool(np.all(g > bound))))
    E = np.array([r.energy for r in records])
    increasing = bool(np.all(np.diff(E) > 0))
    slope = fit_rate(eps_list, E) if len(records) >= 2 else None
    return CounterexampleResult(records, slope, increasing)


def pentagon_interpolation_error(eps: float) -> StudyRecord:
    """Errors of the Wachspress interpolant of ``1 - x^2`` on the pentagon."""
    p = pentagon_eps(eps)
    u = polynomial2(a=-1.0, f=1.0)
    q = QuadratureScheme(pentagon_cells(eps))
    return sobolev_errors(u, interpolate(WachspressCoordinates(p), u, p), p, q, parameter=eps)


# ---------------------------------------------------------------------------
# gradient bounds


def quasi_random_interior(p: Polygon, count: int, seed: int = 42, margin: float = 0.0) -> np.ndarray:
    """``count`` Halton points of the bounding box that fall inside ``p``.

    ``margin`` (relative to the diameter) keeps points off the boundary.
    """
    lo, hi = p.vertices.min(0), p.vertices.max(0)
    sampler = qmc.Halton(d=2, scramble=True, seed=seed)
    out = []
    have = 0
    while have < count:
        pts = qmc.scale(sampler.random(max(64, 2 * (count - have))), lo, hi)
        keep = pts[p.boundary_distance(pts) > margin * p.diameter]
        out.append(keep)
        have += len(keep)
    return np.concatenate(out)[:count]


REQUIRED_CONDITIONS = {
    "wachspress": ("G1", "G2", "G3", "G4", "G5"),
    "sibson": ("G1", "G2", "G4"),
}


@dataclass
class AuditResult:
    family: str
    sampled_sup_grad: float
    theoretical_bound: float
    passed: bool
    samples: int
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["pass"] = out.pop("passed")
        return out


def gradient_bound_audit(
    kind: str, p: Polygon, t: ConditionThresholds, samples: int = 10_000, seed: int = 42, d_samples: int = 1000
) -> AuditResult:
    """Sampled ``sup |grad lambda_i|`` against the uniform bound for the thresholds.

    The polygon is rescaled to diameter 1, where the bounds are stated.  For
    Sibson the minimum of the restricted cell area of the sample point is
    also compared against its lower bound.
    """
    if kind not in REQUIRED_CONDITIONS:
        raise ValueError(f"no gradient bound for family {kind!r}")
    unit = p.rescaled()
    status = check_polygon(unit, t)
    missing = [g for g in REQUIRED_CONDITIONS[kind] if not status[g]]
    if missing:
        raise ConditionsNotMet(f"{kind} bound needs {', '.join(REQUIRED_CONDITIONS[kind])}; failed: {', '.join(missing)}")
    consts = derived_bound_constants(t)
    pts = quasi_random_interior(unit, samples, seed=seed, margin=1e-9)
    extra = {"conditions": status, "constants": consts.as_dict()}
    if kind == "wachspress":
        grads = WachspressCoordinates(unit).evaluate(pts)[1]
        bound = consts.wach_grad_bound
        sup = float(np.linalg.norm(grads, axis=2).max())
        ok = sup <= bound
    else:
        grads = SibsonCoordinates(unit).evaluate(pts)[1]
        bound = consts.sibs_grad_bound
        sup = float(np.linalg.norm(grads, axis=2).max())
        restricted = SibsonCoordinates(unit, clip_to_domain=True)
        D = np.array([restricted.breakdown(x).D for x in pts[:d_samples]])
        extra["min_D"] = float(D.min())
        extra["D_star"] = consts.D_star
        ok = sup <= bound and D.min() >= consts.D_star
    return AuditResult(kind, sup, bound, bool(ok), len(pts), extra)


def angle_product_inequality(n: int) -> float:
    """Left side of ``n (n-2) [pi / (4 (n-3))]^(n-3) <= 2 pi``; defined for n >= 4."""
    return n * (n - 2) * (math.pi / (4 * (n - 3))) ** (n - 3)


# ---------------------------------------------------------------------------
# thin triangles


def thin_triangle(max_angle_deg: float) -> Polygon:
    """Isosceles triangle on ``(-1, 0), (1, 0)`` with apex angle ``max_angle_deg``."""
    height = 1.0 / math.tan(math.radians(max_angle_deg) / 2)
    return validate_polygon([(-1.0, 0.0), (1.0, 0.0), (0.0, height)])


def thin_triangle_study(angles_deg: Sequence[float] = (60.0, 120.0, 170.0, 178.0), u: ScalarField | None = None) -> list:
    """Interpolation errors of ``u`` (default ``x^2``) as the apex angle opens up."""
    u = polynomial2(a=1.0) if u is None else u
    out = []
    for ang in angles_deg:
        p = thin_triangle(ang)
        fam = TriangulationCoordinates(p)
        q, adaptive = family_quadrature(fam)
        out.append(sobolev_errors(u, interpolate(fam, u, p), p, q, parameter=float(ang), adaptive=adaptive))
    return out


# ---------------------------------------------------------------------------
# output


def fmt(x) -> str:
    """Round-trip-exact text for a float (17 significant digits)."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def to_json(obj, indent: int = 0) -> str:
    """JSON text with every float written to 17 significant digits.

    Keys are sorted and non-finite floats become ``null`` so that equal
    inputs always give identical bytes.
    """
    pad = "  " * (indent + 1)
    end = "  " * indent
    if hasattr(obj, "to_dict"):
        obj = obj.to_dict()
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {to_json(v, indent + 1)}" for k, v in sorted(obj.items(), key=lambda kv: str(kv[0]))]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            return "[]"
        return "[\n" + ",\n".join(pad + to_json(v, indent + 1) for v in obj) + "\n" + end + "]"
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_, int, np.integer)):
        return fmt(obj)
    if isinstance(obj, (float, np.floating)):
        return fmt(obj) if math.isfinite(obj) else "null"
    return json.dumps(str(obj))


STUDY_COLUMNS = ("parameter", "l2_error", "h1_semi_error", "h1_error", "fitted_rate")


def records_to_csv(records: Sequence[StudyRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(STUDY_COLUMNS)
    for r in records:
        w.writerow([fmt(getattr(r, c)) for c in STUDY_COLUMNS])
    return buf.getvalue()
