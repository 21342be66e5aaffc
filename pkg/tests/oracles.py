"""Independent reference computations used by the tests.

None of these route through conekit's triangulation or quadrature.
"""

from __future__ import annotations

from fractions import Fraction
from itertools import combinations

import numpy as np
import sympy as sp
from scipy.optimize import linprog
from scipy.spatial import HalfspaceIntersection


def halfspace_vertices(facets):
    """Vertices by scipy's halfspace intersection, seeded at the Chebyshev center."""
    A = np.array([f[0] for f in facets], dtype=float)
    c = np.array([float(Fraction(f[1])) for f in facets])
    # <u,x> + c >= 0  <=>  -u.x - c <= 0
    norms = np.linalg.norm(A, axis=1)
    res = linprog(np.r_[np.zeros(A.shape[1]), -1.0], A_ub=np.c_[-A, norms], b_ub=c,
                  bounds=[(None, None)] * A.shape[1] + [(0, None)])
    hs = HalfspaceIntersection(np.c_[-A, -c], res.x[:-1])
    pts = np.unique(np.round(hs.intersections, 12), axis=0)
    return sorted(map(tuple, pts))


def brute_force_vertices(facets):
    """Every r-subset of facets, solved exactly, filtered by feasibility."""
    r = len(facets[0][0])
    out = set()
    for sub in combinations(facets, r):
        M = sp.Matrix([list(f[0]) for f in sub])
        if M.det() == 0:
            continue
        x = M.solve(sp.Matrix([-sp.Rational(str(f[1])) for f in sub]))
        if all(sum(u * xi for u, xi in zip(f[0], x)) + sp.Rational(str(f[1])) >= 0 for f in facets):
            out.add(tuple(Fraction(int(v.p), int(v.q)) for v in x))
    return sorted(out)


def polygon_order(verts):
    """Counter-clockwise order of a convex polygon's vertices."""
    ctr = np.mean(np.array(verts, dtype=float), axis=0)
    return sorted(verts, key=lambda v: np.arctan2(float(v[1]) - ctr[1], float(v[0]) - ctr[0]))


def green_moment(verts, p: int, q: int) -> Fraction:
    """Exact ``int x^p y^q dA`` over a convex polygon via Green: ``oint x^(p+1) y^q/(p+1) dy``."""
    t = sp.symbols("t")
    vs = polygon_order(verts)
    total = sp.Integer(0)
    for (x0, y0), (x1, y1) in zip(vs, vs[1:] + vs[:1]):
        x0, y0, x1, y1 = (sp.Rational(str(v)) for v in (x0, y0, x1, y1))
        x = x0 + (x1 - x0) * t
        y = y0 + (y1 - y0) * t
        total += sp.integrate(x ** (p + 1) * y**q / (p + 1) * (y1 - y0), (t, 0, 1))
    total = sp.nsimplify(total)
    return Fraction(int(total.p), int(total.q))


def shoelace_area(verts) -> Fraction:
    vs = polygon_order(verts)
    s = sum(Fraction(x0) * Fraction(y1) - Fraction(x1) * Fraction(y0) for (x0, y0), (x1, y1) in zip(vs, vs[1:] + vs[:1]))
    return abs(s) / 2


def polygon_boundary_integral(facets, verts, f):
    """``sum_i int_{F_i} f dsigma_i`` with ``dsigma_i = ds/|u_i|``, by 1-d Gauss-Legendre per edge."""
    xg, wg = np.polynomial.legendre.leggauss(30)
    xg, wg = 0.5 * (xg + 1), 0.5 * wg
    total = 0.0
    for normal, offset, *rest in facets:
        label = rest[0] if rest else 1
        on = [np.array(v, dtype=float) for v in verts
              if sum(Fraction(u) * Fraction(x) for u, x in zip(normal, v)) + Fraction(offset) == 0]
        a, b = on
        length = np.linalg.norm(b - a)
        pts = a + np.outer(xg, b - a)
        total += length / np.linalg.norm(normal) / label * float(wg @ np.array([f(p) for p in pts]))
    return total


def trapezoid_extremal_sympy():
    """Extremal affine function of the trapezoid ``x,y >= 0, y <= 1, x + y <= 2`` by direct sympy integration."""
    x, y, c0, c1, c2 = sp.symbols("x y c0 c1 c2")
    ell = c0 + c1 * x + c2 * y

    def interior(g):
        return sp.integrate(sp.integrate(g, (x, 0, 2 - y)), (y, 0, 1))

    def boundary(g):
        # x = 0 (|u|=1), y = 0, y = 1, and x + y = 2 where ds = sqrt2 dy and |u| = sqrt2
        return (sp.integrate(g.subs(x, 0), (y, 0, 1)) + sp.integrate(g.subs(y, 0), (x, 0, 2))
                + sp.integrate(g.subs(y, 1), (x, 0, 1)) + sp.integrate(g.subs(x, 2 - y), (y, 0, 1)))

    eqs = [sp.Eq(interior(ell * q), 2 * boundary(q)) for q in (sp.Integer(1), x, y)]
    sol = sp.solve(eqs, [c0, c1, c2])
    return sol[c0], sol[c1], sol[c2]


def power_F(k: int, a: float, t: float) -> float:
    """``(1 + a t)^((1 - k a)/a)`` by plain exponentiation."""
    return (1.0 + a * t) ** ((1.0 - k * a) / a)


def loglog_slope(hs, errs) -> float:
    return float(np.polyfit(np.log(np.asarray(hs, dtype=float)), np.log(np.asarray(errs, dtype=float)), 1)[0])
