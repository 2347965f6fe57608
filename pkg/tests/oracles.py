"""Independent reference computations shared by the unit and acceptance tests."""

import itertools
import math

import numpy as np
from scipy import integrate


def tail_constant_quadrature(alpha):
    """1 / int_0^inf x^-alpha sin x dx, evaluated numerically."""
    head, _ = integrate.quad(lambda x: x ** -alpha * math.sin(x), 0.0, 1.0, limit=200)
    tail, _ = integrate.quad(lambda x: x ** -alpha, 1.0, np.inf, weight="sin", wvar=1.0)
    return 1.0 / (head + tail)


def laplace_det(rows):
    if not rows:
        return 1
    return sum((-1) ** j * rows[0][j] * laplace_det([r[:j] + r[j + 1:] for r in rows[1:]])
               for j in range(len(rows)) if rows[0][j])


def determinantal_factors(M):
    """Invariant factors as ratios of gcds of k x k minors."""
    M = [[int(v) for v in row] for row in M]
    m, n = len(M), len(M[0])
    prev, out = 1, []
    for k in range(1, min(m, n) + 1):
        g = 0
        for rows in itertools.combinations(range(m), k):
            for cols in itertools.combinations(range(n), k):
                g = math.gcd(g, laplace_det([[M[i][j] for j in cols] for i in rows]))
        if g == 0:
            break
        out.append(g // prev)
        prev = g
    return tuple(out)


def as_int(a):
    return np.array([[int(v) for v in row] for row in np.asarray(a, dtype=object)], dtype=object)


def unimodular(U):
    return abs(laplace_det([[int(v) for v in row] for row in U])) == 1


def polytope_mc_volume(poly, rng, points=1_000_000):
    verts = np.array([[float(v) for v in x] for x in poly.vertices()])
    lo, hi = verts.min(axis=0), verts.max(axis=0)
    pts = rng.uniform(lo, hi, size=(points, len(lo)))
    return poly.contains_float(pts).mean() * np.prod(hi - lo)
