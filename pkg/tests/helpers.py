"""Shared test utilities."""
import numpy as np


def interior_points(p, m, seed=0, margin=1e-6):
    """Uniform random points of ``p`` at least ``margin * diam`` from the boundary."""
    rng = np.random.default_rng(seed)
    lo, hi = p.vertices.min(0), p.vertices.max(0)
    out = []
    while sum(len(o) for o in out) < m:
        q = rng.uniform(lo, hi, size=(4 * m, 2))
        out.append(q[p.boundary_distance(q) > margin * p.diameter])
    return np.concatenate(out)[:m]
