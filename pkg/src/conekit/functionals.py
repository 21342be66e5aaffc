"""Einstein-Hilbert type functionals, weighted Futaki invariants and friends.

Every functional is evaluated on the momentum polytope.  Integrals of
``f(mu)`` against the volume form become ``int_P f dx``; for an affine ``h``
and a weight ``v > 0`` the total weighted scalar curvature reduces to the
boundary integral

    int_X Scal_v(omega) h(mu) omega^[n] = 2 int_{dP} v h dsigma,

which removes every dependence on the Kahler metric.  ``oracle_scal_v_1d``
checks this identity against the explicit Fubini-Study potential on [0, 1].

Notation: ``I_k(a, l) = int_P F_k(a, l) dx``.  The coefficients ``c`` and
``d`` are computed from the rearranged forms

    c_{lam,a}(l) = (S_a(l) - lam int_P l F_1 dx) / I_1
    d_{lam,a}(l) = (2 int_dP F_1 dsigma - lam int_P l F_2 dx) / I_2

which follow from ``F_0 - F_1 = a l F_1`` and ``F_1 - F_2 = a l F_2`` and
have no ``1/a`` cancellation.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .errors import DomainViolation, FDStepUnderflow, NonNormalizedInput
from .polytope import AffineFunction, LabelledPolytope, _exact_solve
from .weights import F, F_minus_one, WeightParams

GAUSS_POINTS = 8
GRAD_FD_STEP = 1e-6
HESS_FD_STEP = 1e-4
NORMALIZATION_TOL = 1e-9


# -- cached polytope data ---------------------------------------------------------

@dataclass(frozen=True)
class NormalizedCoords:
    """Basis ``x_i - xbar_i`` of normalized affine functions and its Gram matrix."""

    barycenter: np.ndarray
    gram: np.ndarray
    gram_exact: tuple

    def affine(self, theta) -> AffineFunction:
        theta = np.asarray(theta, dtype=float)
        return AffineFunction(tuple(theta), float(-theta @ self.barycenter))

    def coords(self, ell: AffineFunction) -> np.ndarray:
        return ell.gradient()


class PolytopeContext:
    """Quadrature nodes and exact invariants of a polytope, built once."""

    def __init__(self, P: LabelledPolytope, n: int = GAUSS_POINTS):
        self.P = P
        self.dim = P.dim
        ir, br = P.interior_rule(n), P.boundary_rule(n)
        self.xi, self.wi = ir.points, ir.weights
        self.xb, self.wb = br.points, br.weights
        self.verts = np.array([v.as_float() for v in P.vertices])
        self.vol_exact = P.volume
        self.sigma_exact = P.boundary_measure
        self.vol = float(self.vol_exact)
        self.sigma = float(self.sigma_exact)
        self.sbar = float(2 * self.sigma_exact / self.vol_exact)
        xbar = P.barycenter
        self.xbar = np.array([float(v) for v in xbar])
        r = self.dim
        gram_exact = tuple(
            tuple(
                P.integrate_polynomial(lambda x, i=i, j=j: (x[i] - xbar[i]) * (x[j] - xbar[j]))
                for j in range(r)
            )
            for i in range(r)
        )
        self.coords = NormalizedCoords(self.xbar, np.array(gram_exact, dtype=float), gram_exact)
        self.ci = self.xi - self.xbar
        self.cb = self.xb - self.xbar

    def values(self, ell: AffineFunction):
        """``ell`` at the interior nodes, boundary nodes and vertices."""
        f = ell.as_float()
        return f(self.xi), f(self.xb), f(self.verts)


@lru_cache(maxsize=64)
def context(P: LabelledPolytope, n: int = GAUSS_POINTS) -> PolytopeContext:
    return PolytopeContext(P, n)


def normalized_coords(P: LabelledPolytope) -> NormalizedCoords:
    return context(P).coords


def is_normalized(P: LabelledPolytope, ell: AffineFunction) -> bool:
    ctx = context(P)
    li, _, _ = ctx.values(ell)
    scale = 1.0 + np.max(np.abs(li))
    return abs(ctx.wi @ li) <= NORMALIZATION_TOL * scale * ctx.vol


def domain_margin(P: LabelledPolytope, a: float, ell_scaled: AffineFunction) -> float:
    """``min_v min(1 + a l(v), 2 - (1 + a l(v)))`` over the vertices; negative means infeasible."""
    ctx = context(P)
    _, _, lv = ctx.values(ell_scaled)
    base = 1.0 + a * lv
    return float(np.min(np.minimum(base, 2.0 - base)))


def _guard(ctx: PolytopeContext, a: float, lv: np.ndarray):
    base = 1.0 + a * lv
    margin = np.minimum(base, 2.0 - base)
    k = int(np.argmin(margin))
    if not margin[k] > 0:
        vertex = ctx.verts[k].tolist()
        raise DomainViolation(
            f"0 < 1 + a*l < 2 violated at vertex {vertex}: 1 + a*l = {base[k]!r} (a={a!r})",
            vertex=vertex,
            value=float(base[k]),
        )


# -- the shared evaluation kernel ---------------------------------------------------

class _State:
    """All integrals needed at one point ``(a, m)``.

    ``m`` is the affine argument of the weights; ``lm`` is ``lam * m`` supplied
    separately so that ``lam = 1/eps`` never multiplies ``eps * l`` in floating
    point.
    """

    def __init__(self, ctx: PolytopeContext, a: float, mi, mb, mv, lmi):
        _guard(ctx, a, mv)
        self.ctx, self.a = ctx, a
        self.mi, self.lmi = mi, lmi
        wi, wb = ctx.wi, ctx.wb
        self.F1b = F(1, a, mb)
        self.F1i = F(1, a, mi)
        self.F2i = F(2, a, mi)
        self.I1 = float(wi @ self.F1i)
        self.I2 = float(wi @ self.F2i)
        self.B1 = 2.0 * float(wb @ self.F1b)
        self.S = 2.0 * float(wb @ F(0, a, mb))
        self.J1 = float(wi @ (lmi * self.F1i))
        self.J2 = float(wi @ (lmi * self.F2i))
        self.logI1 = float(np.log(self.I1))
        self.V = float(np.exp(self.logI1 / (1.0 - a)))
        self.c = (self.S - self.J1) / self.I1
        self.d = (self.B1 - self.J2) / self.I2

    def futaki(self, b: float, qi, qb) -> float:
        coef = self.lmi + self.c + b / self.I1
        return 2.0 * float(self.ctx.wb @ (self.F1b * qb)) - float(self.ctx.wi @ (coef * self.F2i * qi))

    def futaki_vector(self, b: float) -> np.ndarray:
        """Futaki invariant on the normalized basis ``x_i - xbar_i``."""
        coef = (self.lmi + self.c + b / self.I1) * self.F2i
        wb, wi = self.ctx.wb, self.ctx.wi
        return 2.0 * ((wb * self.F1b) @ self.ctx.cb) - (wi * coef) @ self.ctx.ci


def _state(P, a, ell: AffineFunction, lam: float) -> _State:
    ctx = context(P)
    mi, mb, mv = ctx.values(ell)
    return _State(ctx, float(a), mi, mb, mv, lam * mi)


def _scaled_state(ctx: PolytopeContext, eps: float, a: float, theta: np.ndarray) -> _State:
    li, lb = ctx.ci @ theta, ctx.cb @ theta
    lv = (ctx.verts - ctx.xbar) @ theta
    return _State(ctx, float(a), eps * li, eps * lb, eps * lv, li)


def _phi(a: float, x: float) -> float:
    """``-expm1(-a x)/a`` with its limit ``x`` at ``a = 0``."""
    if a == 0:
        return x
    return -np.expm1(-a * x) / a


# -- functionals ---------------------------------------------------------------------

def S_a(P: LabelledPolytope, a: float, ell: AffineFunction) -> float:
    """Total weighted scalar curvature ``S_a(l) = 2 int_dP F_0(a, l) dsigma``."""
    return _state(P, a, ell, 0.0).S


def V_a(P: LabelledPolytope, a: float, ell: AffineFunction) -> float:
    if a == 1:
        raise ValueError("V_a is undefined at a = 1")
    return _state(P, a, ell, 0.0).V


def EH(P: LabelledPolytope, params: WeightParams, ell: AffineFunction) -> float:
    """``EH_{lam,a,b}(l)``; the ``a = 0`` value is the analytic extension.

    Uses ``lam/a (1 - I_0/V) = lam (phi(a, log I_1/(1-a)) - int l F_1 / V)``.
    """
    params = params.as_lambda()
    lam, a, b = params.lam, params.a, params.b
    st = _state(P, a, ell, 1.0)
    middle = _phi(a, st.logI1 / (1.0 - a)) - st.J1 / st.V
    return st.S / st.V + lam * middle + b / st.V


def EH_tilde_limit(P: LabelledPolytope, ell: AffineFunction) -> float:
    """Limit functional ``(1/vol) int_P (Scal - sbar - (l - lbar)/2) l dx``."""
    ctx = context(P)
    li, lb, _ = ctx.values(ell)
    mean = float(ctx.wi @ li) / ctx.vol
    bd = 2.0 * float(ctx.wb @ lb)
    return (bd - ctx.sbar * float(ctx.wi @ li) - 0.5 * float(ctx.wi @ ((li - mean) * li))) / ctx.vol


def EH_tilde(P: LabelledPolytope, eps: float, a: float, b: float, ell: AffineFunction) -> float:
    """Rescaled functional on normalized affine functions.

    For ``eps != 0`` it equals ``(1/eps)(EH_{1/eps,a,b}(eps l) - (1/(eps a))(1 - V_0(0)/V_a(0))
    - sbar - b/V_a(0))``, evaluated in a cancellation-free arrangement.
    """
    if not is_normalized(P, ell):
        raise NonNormalizedInput(f"{ell} is not normalized: int_P l dx != 0")
    if eps == 0:
        if a != 0:
            raise ValueError("EH_tilde at eps = 0 is only defined on the a = 0 branch")
        return EH_tilde_limit(P, ell)
    ctx = context(P)
    li, lb, lv = ctx.values(ell)
    _guard(ctx, a, eps * lv)
    mi, mb = eps * li, eps * lb
    wi, wb = ctx.wi, ctx.wb
    F1i = F(1, a, mi)
    S = 2.0 * float(wb @ F(0, a, mb))
    # log(I_1 / vol) from int (F_1 - 1), which is O(eps^2) for normalized l
    excess = float(wi @ F_minus_one(1, a, mi)) + (float(wi.sum()) - ctx.vol)
    D = np.log1p(excess / ctx.vol) / (1.0 - a)
    log_va0 = np.log(ctx.vol) / (1.0 - a)
    V = float(np.exp(log_va0 + D))
    shift = float(np.exp(-a * log_va0))
    J1 = float(wi @ (li * F1i))
    inner = S / V - ctx.sbar - J1 / V + shift * _phi(a, D) / eps + b * np.expm1(-D) / np.exp(log_va0)
    return float(inner / eps)


def c_coeff(P: LabelledPolytope, lam: float, a: float, ell: AffineFunction) -> float:
    return _state(P, a, ell, lam).c


def d_coeff(P: LabelledPolytope, lam: float, a: float, ell: AffineFunction) -> float:
    return _state(P, a, ell, lam).d


def futaki_param(P: LabelledPolytope, params: WeightParams, ell: AffineFunction, q: AffineFunction) -> float:
    """``Fut_{lam,a,b,l}(q) = 2 int_dP F_1 q dsigma - int_P (lam l + c + b/I_1) F_2 q dx``."""
    params = params.as_lambda()
    st = _state(P, params.a, ell, params.lam)
    ctx = st.ctx
    return st.futaki(params.b, q.as_float()(ctx.xi), q.as_float()(ctx.xb))


def futaki_vw(P: LabelledPolytope, v, w, ell: AffineFunction) -> float:
    """``Fut_{v,w}(l) = 2 int_dP v l dsigma - int_P w l dx``; v, w callables or constants."""
    ctx = context(P)
    f = ell.as_float()

    def at(g, x):
        return np.broadcast_to(np.asarray(g(x) if callable(g) else g, dtype=float), (len(x),))

    return 2.0 * float(ctx.wb @ (at(v, ctx.xb) * f(ctx.xb))) - float(ctx.wi @ (at(w, ctx.xi) * f(ctx.xi)))


# -- gradient / Hessian of the rescaled functional -----------------------------------

def _theta(P: LabelledPolytope, ell) -> np.ndarray:
    if isinstance(ell, AffineFunction):
        if not is_normalized(P, ell):
            raise NonNormalizedInput(f"{ell} is not normalized: int_P l dx != 0")
        return ell.gradient()
    return np.asarray(ell, dtype=float)


def gradient_theta(ctx: PolytopeContext, eps: float, a: float, b: float, theta: np.ndarray) -> np.ndarray:
    st = _scaled_state(ctx, eps, a, theta)
    return st.futaki_vector(b) / st.V


def gradient(P: LabelledPolytope, eps: float, a: float, b: float, ell) -> np.ndarray:
    """Differential of ``EH_tilde_{eps,a,b}`` at ``ell`` on the basis ``x_i - xbar_i``.

    Equals ``Fut_{1/eps,a,b,eps l}(q_i) / V_a(eps l)``; the expression extends
    continuously to ``eps = 0``.
    """
    return gradient_theta(context(P), eps, a, b, _theta(P, ell))


def hessian_theta(ctx: PolytopeContext, eps: float, a: float, b: float, theta: np.ndarray) -> np.ndarray:
    if eps == 0 and a == 0 and b == 0:
        return -ctx.coords.gram / ctx.vol
    if not np.all(np.isfinite(theta)):
        raise FDStepUnderflow("non-finite coordinates")
    h = HESS_FD_STEP * (1.0 + float(np.linalg.norm(theta)))
    if not theta.size or h <= 1e3 * np.finfo(float).eps * float(np.linalg.norm(theta)):
        raise FDStepUnderflow(f"finite-difference step {h!r} underflows")
    r = theta.size
    H = np.empty((r, r))
    for j in range(r):
        e = np.zeros(r)
        e[j] = h
        H[:, j] = (gradient_theta(ctx, eps, a, b, theta + e) - gradient_theta(ctx, eps, a, b, theta - e)) / (2 * h)
    return 0.5 * (H + H.T)


def hessian(P: LabelledPolytope, eps: float, a: float, b: float, ell) -> np.ndarray:
    """Second differential of ``EH_tilde``: ``-gram/vol`` at the origin, central differences elsewhere."""
    return hessian_theta(context(P), eps, a, b, _theta(P, ell))


# -- extremal affine function ---------------------------------------------------------

@dataclass(frozen=True)
class ExtremalData:
    ell_ext: AffineFunction
    ell_ext_normalized: AffineFunction
    sbar: Fraction
    vol: Fraction
    sigma: Fraction
    barycenter: tuple
    residuals: tuple

    def to_dict(self) -> dict:
        return {
            "ell_ext": self.ell_ext.to_dict(),
            "ell_ext_normalized": self.ell_ext_normalized.to_dict(),
            "sbar": float(self.sbar),
            "vol": float(self.vol),
            "sigma": float(self.sigma),
            "barycenter": [float(v) for v in self.barycenter],
            "residuals": [float(v) for v in self.residuals],
        }


@lru_cache(maxsize=64)
def extremal_affine(P: LabelledPolytope) -> ExtremalData:
    """Solve ``int_P l_ext q dx = 2 int_dP q dsigma`` for all affine ``q``, exactly."""
    r = P.dim
    basis = [lambda x: 1] + [lambda x, i=i: x[i] for i in range(r)]
    gram = [[P.integrate_polynomial(lambda x, f=f, g=g: f(x) * g(x)) for g in basis] for f in basis]
    rhs = [2 * P.integrate_polynomial_boundary(f) for f in basis]
    sol = _exact_solve(gram, rhs)
    if sol is None:
        from .errors import SolverError

        raise SolverError("singular Gram matrix for the extremal affine function")
    ell = AffineFunction(tuple(sol[1:]), sol[0])
    mean = P.integrate_polynomial(lambda x: ell(x)) / P.volume
    ell0 = AffineFunction(ell.xi, ell.c - mean)
    ctx = context(P)
    fl = ell.as_float()
    res = []
    for k in range(r + 1):
        qi = np.ones(len(ctx.xi)) if k == 0 else ctx.xi[:, k - 1]
        qb = np.ones(len(ctx.xb)) if k == 0 else ctx.xb[:, k - 1]
        res.append(float(ctx.wi @ (fl(ctx.xi) * qi)) - 2.0 * float(ctx.wb @ qb))
    return ExtremalData(ell, ell0, 2 * P.boundary_measure / P.volume, P.volume, P.boundary_measure,
                        P.barycenter, tuple(res))


# -- one-dimensional metric oracle ---------------------------------------------------

_D2_STENCIL = np.array([-1 / 560, 8 / 315, -1 / 5, 8 / 5, -205 / 72, 8 / 5, -1 / 5, 8 / 315, -1 / 560])


def _second_derivative(f, x, h=1e-2):
    offsets = np.arange(-4, 5) * h
    vals = np.stack([np.asarray(f(x + o), dtype=float) for o in offsets])
    return _D2_STENCIL @ vals / h**2


def oracle_scal_v_1d(v, h: AffineFunction, d2=None, points: int = 40):
    """Compare ``-int_0^1 (v 2x(1-x))'' h dx`` with ``2 (v(0)h(0) + v(1)h(1))``.

    ``2x(1-x)`` is the inverse Hessian of the Fubini-Study potential on [0, 1],
    so the left side is the honest integral of ``Scal_v`` against ``h``.
    ``d2`` may supply ``(v u)''`` analytically; otherwise an eighth-order
    central difference is used.
    """
    x, w = np.polynomial.legendre.leggauss(points)
    x, w = 0.5 * (x + 1.0), 0.5 * w
    if np.any(np.asarray(v(x)) <= 0):
        raise ValueError("weight v must be positive on [0, 1]")

    def vu(t):
        return np.asarray(v(t), dtype=float) * 2.0 * t * (1.0 - t)

    second = d2(x) if d2 is not None else _second_derivative(vu, x)
    hf = h.as_float()
    hx = hf(x[:, None])
    lhs = -float(w @ (second * hx))
    v0, v1 = float(np.asarray(v(np.array([0.0])))[0]), float(np.asarray(v(np.array([1.0])))[0])
    rhs = 2.0 * (v0 * float(hf(np.array([[0.0]]))[0]) + v1 * float(hf(np.array([[1.0]]))[0]))
    return lhs, rhs
