"""Command-line front end.

Exit codes: 0 success, 2 invalid input, 3 query point outside the polygon,
4 a study ran but its built-in check failed (output carries ``"pass": false``).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import analysis as an
from .coordinates import FAMILIES
from .errors import PointOutside, PolybaryError
from .geometry import ConditionThresholds, check_conditions, load_polygon, measure

EXIT_OK, EXIT_INVALID, EXIT_OUTSIDE, EXIT_FAILED = 0, 2, 3, 4

DEFAULT_SCALES = "1,0.5,0.25,0.125,0.0625"
DEFAULT_EPS = "0.1,0.05,0.025,0.0125"
DEFAULT_ANGLES = "60,120,170,178"
RATE_BANDS = {"h1": (0.9, 1.1), "l2": (1.85, 2.15)}
HARMONIC_RATE_BANDS = {"h1": (0.85, 1.15), "l2": (1.85, 2.15)}


class UsageError(Exception):
    pass


def _floats(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(t) for t in text]
    try:
        return [float(t) for t in str(text).split(",") if t.strip()]
    except ValueError as exc:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from exc


def _point(text) -> list[float]:
    vals = _floats(text)
    if len(vals) != 2:
        raise UsageError(f"a point needs two coordinates, got {text!r}")
    return vals


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="polybary", description="Generalized barycentric coordinates on convex polygons.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, polygon=True):
        if polygon:
            p.add_argument("--polygon", help='JSON file {"vertices": [[x, y], ...]}')
        p.add_argument("--out", help="output file (.json for JSON, otherwise CSV)")
        p.add_argument("--seed", type=int, default=42)
        p.add_argument("--config", help="JSON file whose keys override the flags")

    def thresholds(p):
        p.add_argument("--gamma-star", type=float)
        p.add_argument("--d-star", type=float)
        p.add_argument("--beta-star-max", type=float)
        p.add_argument("--beta-star-min", type=float)
        p.add_argument("--n-star", type=int)

    p = sub.add_parser("eval", help="coordinates and gradients at points")
    common(p)
    p.add_argument("--family", choices=FAMILIES, default="wachspress")
    p.add_argument("--point", action="append", default=[], help="x,y (repeatable)")
    p.add_argument("--grid", type=int, help="m x m grid over the bounding box, points inside only")
    p.add_argument("--harmonic-level", type=int)

    p = sub.add_parser("check", help="shape conditions G1-G5")
    common(p)
    thresholds(p)

    p = sub.add_parser("convergence", help="interpolation error rates under scaling")
    common(p)
    p.add_argument("--family", choices=FAMILIES, default="wachspress")
    p.add_argument("--scales", default=DEFAULT_SCALES)
    p.add_argument("--harmonic-level", type=int)

    p = sub.add_parser("counterexample", help="Wachspress gradient energy on the near-square pentagon")
    common(p, polygon=False)
    p.add_argument("--eps", default=DEFAULT_EPS)
    p.add_argument("--grid", type=int, default=50)

    p = sub.add_parser("bounds", help="sampled gradients against the uniform bounds")
    common(p)
    thresholds(p)
    p.add_argument("--family", choices=("wachspress", "sibson"), default="wachspress")
    p.add_argument("--samples", type=int, default=10_000)

    p = sub.add_parser("levelset", help="grid of one coordinate for plotting")
    common(p)
    p.add_argument("--family", choices=FAMILIES, default="wachspress")
    p.add_argument("--index", type=int, default=1, help="vertex number, starting at 1")
    p.add_argument("--grid", type=int, default=200)
    p.add_argument("--harmonic-level", type=int)

    p = sub.add_parser("thin-tri", help="triangle interpolation error as the largest angle opens")
    common(p, polygon=False)
    p.add_argument("--angles", default=DEFAULT_ANGLES, help="apex angles in degrees")
    return ap


def _apply_config(args: argparse.Namespace) -> argparse.Namespace:
    if not args.config:
        return args
    try:
        cfg = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {args.config}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise UsageError("config must be a JSON object")
    for key, val in cfg.items():
        dest = key.replace("-", "_")
        if dest in ("command", "config"):
            continue
        if not hasattr(args, dest):
            raise UsageError(f"config key {key!r} does not apply to {args.command}")
        setattr(args, dest, val)
    return args


def _polygon(args):
    if not args.polygon:
        raise UsageError("--polygon is required")
    return load_polygon(args.polygon)


def _thresholds(args) -> ConditionThresholds:
    need = {"gamma_star": args.gamma_star, "d_star": args.d_star, "beta_star_max": args.beta_star_max}
    missing = [k for k, v in need.items() if v is None]
    if missing:
        raise UsageError("missing thresholds: " + ", ".join("--" + k.replace("_", "-") for k in missing))
    return ConditionThresholds.from_partial(args.gamma_star, args.d_star, args.beta_star_max, args.beta_star_min, args.n_star)


def _csv(rows, header) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([v if isinstance(v, str) else an.fmt(v) for v in row])
    return buf.getvalue()


def _wants_json(args) -> bool:
    return bool(args.out) and str(args.out).lower().endswith(".json")


def _emit(args, text: str) -> None:
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _grid_points(p, m: int):
    lo, hi = p.vertices.min(0), p.vertices.max(0)
    xs = np.linspace(lo[0], hi[0], m)
    ys = np.linspace(lo[1], hi[1], m)
    return xs, ys


def cmd_eval(args) -> int:
    p = _polygon(args)
    pts = [_point(s) for s in args.point]
    if args.grid:
        xs, ys = _grid_points(p, int(args.grid))
        X, Y = np.meshgrid(xs, ys)
        g = np.c_[X.ravel(), Y.ravel()]
        pts.extend(g[p.contains(g)].tolist())
    if not pts:
        raise UsageError("give --point or --grid")
    pts = np.array(pts, dtype=float)
    fam = an.build_family(args.family, p, args.harmonic_level)
    vals, grads = fam.evaluate(pts)
    n = p.n
    header = ["x", "y"] + [f"lambda_{i + 1}" for i in range(n)] + [f"dx_{i + 1}" for i in range(n)] + [f"dy_{i + 1}" for i in range(n)]
    rows = [list(x) + list(v) + list(g[:, 0]) + list(g[:, 1]) for x, v, g in zip(pts, vals, grads)]
    if _wants_json(args):
        _emit(args, an.to_json({"family": args.family, "columns": header, "rows": rows}) + "\n")
    else:
        _emit(args, _csv(rows, header))
    return EXIT_OK


def cmd_check(args) -> int:
    p = _polygon(args)
    t = _thresholds(args)
    report = measure(p.rescaled())
    out = dict(check_conditions(report, t))
    out["report"] = {k: v for k, v in report.__dict__.items()}
    out["thresholds"] = dict(t.__dict__)
    _emit(args, an.to_json(out) + "\n")
    return EXIT_OK


def cmd_convergence(args) -> int:
    p = _polygon(args)
    scales = _floats(args.scales)
    if len(scales) < 2 or min(scales) <= 0:
        raise UsageError("need at least two positive scales")
    res = an.convergence_study(args.family, p, an.polynomial2(1.0, 1.0, 1.0), scales, args.harmonic_level)
    bands = HARMONIC_RATE_BANDS if args.family == "harmonic" else RATE_BANDS
    ok = (
        not res.rate_fit_skipped
        and res.l2_rate is not None
        and bands["h1"][0] <= res.h1_rate <= bands["h1"][1]
        and bands["l2"][0] <= res.l2_rate <= bands["l2"][1]
    )
    if _wants_json(args):
        out = res.to_dict()
        out["pass"] = ok
        out["bands"] = bands
        _emit(args, an.to_json(out) + "\n")
    else:
        _emit(args, an.records_to_csv(res.records))
    return EXIT_OK if ok else EXIT_FAILED


def cmd_counterexample(args) -> int:
    eps = _floats(args.eps)
    if not eps or not all(0 < e < 1 for e in eps):
        raise UsageError("eps values must lie in (0, 1)")
    res = an.counterexample_study(eps, grid=int(args.grid))
    if _wants_json(args):
        _emit(args, an.to_json(res) + "\n")
    else:
        header = ["eps", "energy", "min_pointwise", "pointwise_bound", "pointwise_pass", "slope"]
        rows = [[r.eps, r.energy, r.min_pointwise, r.pointwise_bound, r.pointwise_pass, None] for r in res.records]
        if rows:
            rows[-1][-1] = res.slope
        _emit(args, _csv(rows, header))
    return EXIT_OK if res.passed else EXIT_FAILED


def cmd_bounds(args) -> int:
    p = _polygon(args)
    t = _thresholds(args)
    res = an.gradient_bound_audit(args.family, p, t, samples=int(args.samples), seed=int(args.seed))
    _emit(args, an.to_json(res) + "\n")
    return EXIT_OK if res.passed else EXIT_FAILED


def cmd_levelset(args) -> int:
    p = _polygon(args)
    i = int(args.index)
    if not 1 <= i <= p.n:
        raise UsageError(f"--index must be between 1 and {p.n}")
    m = int(args.grid)
    if m < 2:
        raise UsageError("--grid must be at least 2")
    xs, ys = _grid_points(p, m)
    X, Y = np.meshgrid(xs, ys)
    g = np.c_[X.ravel(), Y.ravel()]
    inside = p.contains(g)
    vals = np.full(len(g), np.nan)
    fam = an.build_family(args.family, p, args.harmonic_level)
    if inside.any():
        vals[inside] = fam.values(g[inside])[:, i - 1]
    vals = vals.reshape(m, m)
    if _wants_json(args):
        _emit(args, an.to_json({"family": args.family, "index": i, "x": xs, "y": ys, "values": vals}) + "\n")
    else:
        rows = [[y] + ["nan" if math.isnan(v) else an.fmt(v) for v in row] for y, row in zip(ys, vals)]
        _emit(args, _csv(rows, ["y\\x"] + [an.fmt(x) for x in xs]))
    return EXIT_OK


def cmd_thin_tri(args) -> int:
    angles = _floats(args.angles)
    if not all(0 < a < 180 for a in angles):
        raise UsageError("angles must lie in (0, 180) degrees")
    recs = an.thin_triangle_study(sorted(angles))
    h1 = [r.h1_error for r in recs]
    ok = all(b > a for a, b in zip(h1, h1[1:]))
    if _wants_json(args):
        _emit(args, an.to_json({"records": [r.__dict__ for r in recs], "pass": ok}) + "\n")
    else:
        _emit(args, an.records_to_csv(recs))
    return EXIT_OK if ok else EXIT_FAILED


COMMANDS = {
    "eval": cmd_eval,
    "check": cmd_check,
    "convergence": cmd_convergence,
    "counterexample": cmd_counterexample,
    "bounds": cmd_bounds,
    "levelset": cmd_levelset,
    "thin-tri": cmd_thin_tri,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args = _apply_config(args)
        return COMMANDS[args.command](args)
    except PointOutside as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OUTSIDE
    except (UsageError, PolybaryError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
