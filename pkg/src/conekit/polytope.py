"""Labelled momentum polytopes and integration over them.

A polytope is stored through its facet inequalities ``<u_i, x> + c_i >= 0``
with primitive inward normals ``u_i``.  Vertices, triangulations, volumes and
polynomial integrals are computed in exact rational arithmetic; everything
else runs on cached Gauss rules in floating point.

Measures
--------
* interior: Lebesgue measure ``dx`` on P.
* boundary: on each facet ``F_i`` the measure ``dsigma_i`` defined by
  ``dx = dsigma_i ^ dl_i`` with ``l_i = <u_i, x> + c_i``, i.e. the Euclidean
  facet measure divided by ``|u_i|``, further divided by the facet label.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np
import sympy as sp
from scipy.optimize import linprog
from scipy.special import roots_jacobi

from .errors import PolytopeError, QuadratureNotConverged

__all__ = [
    "AffineFunction",
    "Facet",
    "LabelledPolytope",
    "QuadratureRule",
    "QuadratureSpec",
    "Vertex",
    "affine_range",
    "integrate_boundary",
    "integrate_interior",
    "interval",
    "load_polytope",
    "mean_scalar",
    "simplex",
    "vertices",
]


def _frac(value) -> Fraction:
    if isinstance(value, str):
        return Fraction(value.strip())
    if isinstance(value, float):
        return Fraction(value).limit_denominator(10**12)
    return Fraction(value)


def _exact_det(rows: Sequence[Sequence[Fraction]]) -> Fraction:
    """Determinant by fraction-exact Gaussian elimination."""
    m = [list(map(Fraction, row)) for row in rows]
    n = len(m)
    det = Fraction(1)
    for col in range(n):
        pivot = next((i for i in range(col, n) if m[i][col] != 0), None)
        if pivot is None:
            return Fraction(0)
        if pivot != col:
            m[col], m[pivot] = m[pivot], m[col]
            det = -det
        det *= m[col][col]
        for i in range(col + 1, n):
            factor = m[i][col] / m[col][col]
            if factor:
                for j in range(col, n):
                    m[i][j] -= factor * m[col][j]
    return det


def _exact_solve(a: Sequence[Sequence[Fraction]], b: Sequence[Fraction]) -> list[Fraction] | None:
    n = len(a)
    m = [list(map(Fraction, row)) + [Fraction(rhs)] for row, rhs in zip(a, b)]
    for col in range(n):
        pivot = next((i for i in range(col, n) if m[i][col] != 0), None)
        if pivot is None:
            return None
        m[col], m[pivot] = m[pivot], m[col]
        for i in range(n):
            if i != col and m[i][col] != 0:
                factor = m[i][col] / m[col][col]
                for j in range(col, n + 1):
                    m[i][j] -= factor * m[col][j]
    return [m[i][n] / m[i][i] for i in range(n)]


@dataclass(frozen=True)
class AffineFunction:
    """``l(x) = <xi, x> + c``.

    Entries may be floats or Fractions; evaluation on numpy arrays is in
    floating point, evaluation on tuples of Fractions stays exact.
    """

    xi: tuple
    c: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "xi", tuple(self.xi))

    @property
    def dim(self) -> int:
        return len(self.xi)

    @classmethod
    def constant(cls, value, dim: int) -> "AffineFunction":
        return cls((0.0,) * dim, value)

    def gradient(self) -> np.ndarray:
        return np.array([float(v) for v in self.xi])

    def __call__(self, x):
        if isinstance(x, np.ndarray):
            return x @ self.gradient() + float(self.c)
        return sum(u * v for u, v in zip(self.xi, x)) + self.c

    def __add__(self, other):
        if isinstance(other, AffineFunction):
            return AffineFunction(tuple(u + v for u, v in zip(self.xi, other.xi)), self.c + other.c)
        return AffineFunction(self.xi, self.c + other)

    __radd__ = __add__

    def __neg__(self):
        return AffineFunction(tuple(-u for u in self.xi), -self.c)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, s):
        return AffineFunction(tuple(s * u for u in self.xi), s * self.c)

    __rmul__ = __mul__

    def __truediv__(self, s):
        return AffineFunction(tuple(u / s for u in self.xi), self.c / s)

    def as_float(self) -> "AffineFunction":
        return AffineFunction(tuple(float(u) for u in self.xi), float(self.c))

    def to_dict(self) -> dict:
        return {"xi": [float(u) for u in self.xi], "c": float(self.c)}

    @classmethod
    def from_dict(cls, data: dict) -> "AffineFunction":
        return cls(tuple(data["xi"]), data["c"])


@dataclass(frozen=True)
class Facet:
    normal: tuple
    offset: Fraction
    label: int = 1

    def __post_init__(self):
        object.__setattr__(self, "normal", tuple(int(u) for u in self.normal))
        object.__setattr__(self, "offset", _frac(self.offset))
        if int(self.label) < 1:
            raise PolytopeError(f"facet label must be a positive integer, got {self.label}")
        object.__setattr__(self, "label", int(self.label))

    def value(self, x) -> Fraction:
        return sum(u * v for u, v in zip(self.normal, x)) + self.offset


@dataclass(frozen=True)
class Vertex:
    point: tuple
    active: frozenset

    def as_float(self) -> np.ndarray:
        return np.array([float(v) for v in self.point])


@dataclass(frozen=True)
class QuadratureSpec:
    """How integrals over a polytope are computed.

    ``scheme`` is ``"gauss"`` (collapsed Gauss-Jacobi per simplex) or
    ``"exact"`` (rational integration of polynomial integrands).
    """

    scheme: str = "gauss"
    points_per_axis: int = 8
    refinement_tolerance: float = 1e-12
    max_refinements: int = 4

    def __post_init__(self):
        if self.scheme not in ("gauss", "exact"):
            raise ValueError(f"unknown quadrature scheme {self.scheme!r}")
        if self.points_per_axis < 2:
            raise ValueError("points_per_axis must be >= 2")
        if not self.refinement_tolerance > 0:
            raise ValueError("refinement_tolerance must be positive")


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray

    def integrate(self, values: np.ndarray) -> float:
        return float(np.dot(self.weights, values))


@lru_cache(maxsize=None)
def _reference_simplex_rule(dim: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Collapsed (Duffy) Gauss-Jacobi rule on ``{t >= 0, sum(t) <= 1}``.

    Exact for polynomials of total degree ``<= 2n - 1``; weights sum to
    ``1/dim!``.
    """
    if dim == 0:
        return np.zeros((1, 0)), np.ones(1)
    axes = []
    for i in range(dim):
        alpha = dim - 1 - i
        x, w = roots_jacobi(n, alpha, 0.0)
        t = 0.5 * (1.0 + x)
        axes.append((t, w * 0.5 ** (alpha + 1)))
    pts, wts = [], []
    for combo in itertools.product(*(range(n) for _ in range(dim))):
        lam = np.empty(dim)
        scale = 1.0
        weight = 1.0
        for i, j in enumerate(combo):
            t, w = axes[i]
            lam[i] = scale * t[j]
            scale *= 1.0 - t[j]
            weight *= w[j]
        pts.append(lam)
        wts.append(weight)
    return np.array(pts), np.array(wts)


class LabelledPolytope:
    """Compact simple lattice polytope ``{x : <u_i, x> + c_i >= 0}``.

    Parameters
    ----------
    facets : iterable of Facet or (normal, offset[, label]) tuples
    dim : int, optional
        Ambient dimension; inferred from the first normal when omitted.
    delzant : bool
        Additionally require the normals at each vertex to form a lattice basis.
    """

    def __init__(self, facets: Iterable, dim: int | None = None, delzant: bool = False):
        parsed = []
        for f in facets:
            if not isinstance(f, Facet):
                f = Facet(*f)
            parsed.append(f)
        if not parsed:
            raise PolytopeError("a polytope needs at least one facet")
        self.dim = int(dim if dim is not None else len(parsed[0].normal))
        if self.dim < 1:
            raise PolytopeError("dimension must be positive")
        for i, f in enumerate(parsed):
            if len(f.normal) != self.dim:
                raise PolytopeError(f"facet {i}: normal {list(f.normal)} has length {len(f.normal)}, expected {self.dim}")
            if math.gcd(*f.normal) != 1:
                raise PolytopeError(
                    f"facet {i}: normal {list(f.normal)} is not primitive (gcd {math.gcd(*f.normal)})"
                )
        self.facets: tuple[Facet, ...] = tuple(parsed)
        self._check_bounded()
        _ = self.vertices
        if delzant:
            self._check_delzant()

    def __repr__(self):
        rows = ", ".join(f"({list(f.normal)}, {f.offset})" for f in self.facets)
        return f"LabelledPolytope(dim={self.dim}, facets=[{rows}])"

    # -- combinatorics ----------------------------------------------------

    def _check_bounded(self):
        normals = np.array([f.normal for f in self.facets], dtype=float)
        if np.linalg.matrix_rank(normals) < self.dim:
            raise PolytopeError("unbounded polytope: facet normals do not span the ambient space")
        # a direction d with <u_i, d> >= 0 for all i and sum > 0 is a recession direction
        res = linprog(
            np.zeros(self.dim),
            A_ub=-normals,
            b_ub=np.zeros(len(normals)),
            A_eq=normals.sum(axis=0)[None, :],
            b_eq=[1.0],
            bounds=[(None, None)] * self.dim,
            method="highs",
        )
        if res.status == 0:
            raise PolytopeError(f"unbounded polytope: recession direction {res.x.tolist()}")

    @cached_property
    def vertices(self) -> tuple[Vertex, ...]:
        r = self.dim
        found: dict[tuple, set] = {}
        for combo in itertools.combinations(range(len(self.facets)), r):
            rows = [self.facets[i].normal for i in combo]
            rhs = [-self.facets[i].offset for i in combo]
            x = _exact_solve(rows, rhs)
            if x is None:
                continue
            if all(f.value(x) >= 0 for f in self.facets):
                found.setdefault(tuple(x), set()).update(combo)
        if not found:
            raise PolytopeError("empty polytope: no feasible vertex")
        verts = []
        for point, _ in sorted(found.items()):
            active = frozenset(i for i, f in enumerate(self.facets) if f.value(point) == 0)
            if len(active) != r:
                raise PolytopeError(
                    f"degenerate facet intersection at vertex {[str(v) for v in point]}: "
                    f"{len(active)} facets {sorted(active)} meet (polytope is not simple)"
                )
            verts.append(Vertex(point, active))
        pts = np.array([v.as_float() for v in verts])
        if len(verts) < r + 1 or np.linalg.matrix_rank(pts[1:] - pts[0]) < r:
            raise PolytopeError("polytope has empty interior")
        for i, _ in enumerate(self.facets):
            on = [v for v in verts if i in v.active]
            if len(on) < r:
                raise PolytopeError(f"facet {i} is redundant: it does not support a face of dimension {r - 1}")
        return tuple(verts)

    def _check_delzant(self):
        for v in self.vertices:
            det = _exact_det([self.facets[i].normal for i in sorted(v.active)])
            if abs(det) != 1:
                raise PolytopeError(
                    f"vertex {[str(c) for c in v.point]}: normals of facets {sorted(v.active)} "
                    f"do not form a lattice basis (det {det})"
                )

    @cached_property
    def _face_triangulations(self) -> dict:
        return {}

    def _triangulate_face(self, face: frozenset) -> list[tuple[int, ...]]:
        """Pulling triangulation of the face cut out by ``face`` (facet indices).

        Returns simplices as tuples of vertex indices.
        """
        cache = self._face_triangulations
        if face in cache:
            return cache[face]
        idx = [k for k, v in enumerate(self.vertices) if face <= v.active]
        fdim = self.dim - len(face)
        if fdim == 0:
            out = [(idx[0],)]
        else:
            apex = idx[0]
            apex_active = self.vertices[apex].active
            out = []
            for j in range(len(self.facets)):
                if j in face or j in apex_active:
                    continue
                sub = face | {j}
                if any(sub <= self.vertices[k].active for k in idx):
                    out.extend(t + (apex,) for t in self._triangulate_face(sub))
        cache[face] = out
        return out

    @cached_property
    def simplices(self) -> tuple[tuple[int, ...], ...]:
        return tuple(self._triangulate_face(frozenset()))

    @cached_property
    def facet_simplices(self) -> tuple[tuple[tuple[int, ...], ...], ...]:
        return tuple(tuple(self._triangulate_face(frozenset({i}))) for i in range(len(self.facets)))

    # -- exact measures ---------------------------------------------------

    def _simplex_det(self, simplex) -> Fraction:
        pts = [self.vertices[k].point for k in simplex]
        base = pts[0]
        return abs(_exact_det([[a - b for a, b in zip(p, base)] for p in pts[1:]]))

    def _facet_simplex_measure(self, i: int, simplex) -> Fraction:
        """Lattice-normalized (r-1)-measure of a simplex lying in facet i (label ignored)."""
        r = self.dim
        u = self.facets[i].normal
        norm2 = sum(x * x for x in u)
        pts = [self.vertices[k].point for k in simplex]
        base = pts[0]
        rows = [[a - b for a, b in zip(p, base)] for p in pts[1:]]
        rows.append([Fraction(x, norm2) for x in u])
        return abs(_exact_det(rows)) / math.factorial(r - 1)

    @cached_property
    def volume(self) -> Fraction:
        return sum((self._simplex_det(s) for s in self.simplices), Fraction(0)) / math.factorial(self.dim)

    @cached_property
    def facet_measures(self) -> tuple[Fraction, ...]:
        """``sigma(F_i)`` including the ``1/label`` factor."""
        out = []
        for i, simplices in enumerate(self.facet_simplices):
            total = sum((self._facet_simplex_measure(i, s) for s in simplices), Fraction(0))
            out.append(total / self.facets[i].label)
        return tuple(out)

    @cached_property
    def boundary_measure(self) -> Fraction:
        return sum(self.facet_measures, Fraction(0))

    # -- exact polynomial integration ---------------------------------------

    def _exact_simplex_integral(self, expr, symbols, simplex, scale: Fraction, sdim: int) -> Fraction:
        pts = [self.vertices[k].point for k in simplex]
        base = pts[0]
        lam = sp.symbols(f"lam0:{sdim}") if sdim else ()
        subs = {}
        for j, s in enumerate(symbols):
            val = sp.Rational(base[j].numerator, base[j].denominator)
            for m in range(sdim):
                d = pts[m + 1][j] - base[j]
                val += sp.Rational(d.numerator, d.denominator) * lam[m]
            subs[s] = val
        g = sp.expand(expr.subs(subs, simultaneous=True))
        if sdim == 0:
            total = sp.nsimplify(g)
        else:
            poly = sp.Poly(g, *lam)
            total = sp.Integer(0)
            for monom, coeff in poly.terms():
                num = math.prod(math.factorial(e) for e in monom)
                total += coeff * sp.Rational(num, math.factorial(sum(monom) + sdim))
        total = sp.Rational(total)
        return Fraction(int(total.p), int(total.q)) * scale

    def _symbolic(self, f):
        symbols = sp.symbols(f"x0:{self.dim}")
        expr = sp.sympify(f(symbols))
        if not expr.is_polynomial(*symbols):
            raise ValueError("exact-polynomial integration needs a polynomial integrand")
        return expr, symbols

    def integrate_polynomial(self, f) -> Fraction:
        """Exact ``int_P f dx`` for a polynomial ``f`` (callable on sympy symbols)."""
        expr, symbols = self._symbolic(f)
        total = Fraction(0)
        for s in self.simplices:
            total += self._exact_simplex_integral(expr, symbols, s, self._simplex_det(s), self.dim)
        return total

    def integrate_polynomial_boundary(self, f) -> Fraction:
        expr, symbols = self._symbolic(f)
        r = self.dim
        total = Fraction(0)
        for i, simplices in enumerate(self.facet_simplices):
            part = Fraction(0)
            for s in simplices:
                scale = self._facet_simplex_measure(i, s) * math.factorial(r - 1)
                part += self._exact_simplex_integral(expr, symbols, s, scale, r - 1)
            total += part / self.facets[i].label
        return total

    @cached_property
    def barycenter(self) -> tuple[Fraction, ...]:
        vol = self.volume
        return tuple(self.integrate_polynomial(lambda x, j=j: x[j]) / vol for j in range(self.dim))

    # -- floating point rules -------------------------------------------------

    @lru_cache(maxsize=8)
    def interior_rule(self, n: int = 8) -> QuadratureRule:
        ref_pts, ref_w = _reference_simplex_rule(self.dim, n)
        pts, wts = [], []
        for s in self.simplices:
            v = np.array([self.vertices[k].as_float() for k in s])
            edges = v[1:] - v[0]
            pts.append(v[0] + ref_pts @ edges)
            wts.append(ref_w * float(self._simplex_det(s)))
        return QuadratureRule(np.vstack(pts), np.concatenate(wts))

    @lru_cache(maxsize=8)
    def boundary_rule(self, n: int = 8) -> QuadratureRule:
        r = self.dim
        ref_pts, ref_w = _reference_simplex_rule(r - 1, n)
        pts, wts = [], []
        for i, simplices in enumerate(self.facet_simplices):
            label = self.facets[i].label
            for s in simplices:
                v = np.array([self.vertices[k].as_float() for k in s])
                edges = v[1:] - v[0]
                pts.append(v[0] + ref_pts @ edges)
                scale = float(self._facet_simplex_measure(i, s)) * math.factorial(r - 1) / label
                wts.append(ref_w * scale)
        return QuadratureRule(np.vstack(pts), np.concatenate(wts))

    # -- transformations / io -----------------------------------------------

    def unimodular_image(self, matrix, shift) -> "LabelledPolytope":
        """Image under ``x -> A x + b`` with ``A`` in GL(r, Z)."""
        A = sp.Matrix(matrix)
        if abs(A.det()) != 1:
            raise PolytopeError("transformation is not unimodular")
        inv_t = A.inv().T
        b = [_frac(v) for v in shift]
        facets = []
        for f in self.facets:
            u = [int(v) for v in inv_t * sp.Matrix(f.normal)]
            g = math.gcd(*u)
            u = [v // g for v in u]
            offset = f.offset - sum(ui * bi for ui, bi in zip(u, b))
            facets.append(Facet(tuple(u), offset, f.label))
        return LabelledPolytope(facets, self.dim)

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "facets": [
                {"normal": list(f.normal), "offset": str(f.offset), "label": f.label} for f in self.facets
            ],
        }

    @classmethod
    def from_json(cls, data: dict) -> "LabelledPolytope":
        try:
            dim = int(data["dim"])
            raw = data["facets"]
        except (KeyError, TypeError, ValueError) as exc:
            raise PolytopeError(f"malformed polytope JSON: {exc}") from exc
        facets = []
        for i, f in enumerate(raw):
            try:
                normal = [int(u) for u in f["normal"]]
                if any(float(u) != int(u) for u in f["normal"]):
                    raise ValueError("normal entries must be integers")
                offset = _frac(f["offset"])
                label = int(f.get("label", 1))
            except (KeyError, TypeError, ValueError, ZeroDivisionError) as exc:
                raise PolytopeError(f"facet {i}: {exc}") from exc
            facets.append(Facet(tuple(normal), offset, label))
        return cls(facets, dim)


def load_polytope(path: str | Path) -> LabelledPolytope:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise PolytopeError(f"{path}: invalid JSON ({exc})") from exc
    return LabelledPolytope.from_json(data)


def interval() -> LabelledPolytope:
    """[0, 1], the polytope of (P^1, O(1))."""
    return LabelledPolytope([((1,), 0), ((-1,), 1)])


def simplex(n: int) -> LabelledPolytope:
    """Standard n-simplex, the polytope of (P^n, O(1))."""
    facets = [(tuple(int(i == j) for j in range(n)), 0) for i in range(n)]
    facets.append(((-1,) * n, 1))
    return LabelledPolytope(facets)


# -- module-level operations ------------------------------------------------------

def vertices(P: LabelledPolytope) -> tuple[Vertex, ...]:
    return P.vertices


def _values(f, pts: np.ndarray) -> np.ndarray:
    # constant integrands come back as scalars
    return np.broadcast_to(np.asarray(f(pts), dtype=float), (len(pts),))


def _refined(rule_at: Callable[[int], QuadratureRule], f, q: QuadratureSpec) -> float:
    n = q.points_per_axis
    prev = rule_at(n).integrate(_values(f, rule_at(n).points))
    for _ in range(q.max_refinements):
        n *= 2
        rule = rule_at(n)
        cur = rule.integrate(_values(f, rule.points))
        if abs(cur - prev) <= q.refinement_tolerance * max(1.0, abs(cur)):
            return cur
        prev = cur
    raise QuadratureNotConverged(
        f"integral not converged to {q.refinement_tolerance:g} after {q.max_refinements} refinements "
        f"(last two levels {prev!r})"
    )


def integrate_interior(P: LabelledPolytope, f, q: QuadratureSpec | None = None):
    """``int_P f dx``.

    ``f`` takes an ``(m, r)`` array and returns ``m`` values.  In ``"exact"``
    mode ``f`` is instead called on a tuple of sympy symbols and must return a
    polynomial; the result is a Fraction.
    """
    q = q or QuadratureSpec()
    if q.scheme == "exact":
        return P.integrate_polynomial(f)
    return _refined(P.interior_rule, f, q)


def integrate_boundary(P: LabelledPolytope, f, q: QuadratureSpec | None = None):
    """``sum_i (1/label_i) int_{F_i} f dsigma_i``."""
    q = q or QuadratureSpec()
    if q.scheme == "exact":
        return P.integrate_polynomial_boundary(f)
    return _refined(P.boundary_rule, f, q)


def mean_scalar(P: LabelledPolytope) -> Fraction:
    """Average scalar curvature ``2 sigma(dP) / vol(P)``, exactly."""
    return 2 * P.boundary_measure / P.volume


def affine_range(P: LabelledPolytope, ell: AffineFunction) -> tuple:
    values = [ell(v.point) for v in P.vertices]
    return min(values), max(values)
