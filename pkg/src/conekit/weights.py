"""The weight family ``F_k(a, t) = (1 + a t)^((1 - k a)/a)`` and Sasaki weights.

``F_k(0, t) = exp(t)`` is the analytic extension at ``a = 0``.  Near that
point the exponent ``(1 - k a) log(1 + a t) / a`` is evaluated from a
truncated series in ``a`` so the two branches join smoothly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainViolation, ReebPositivityViolation
from .polytope import AffineFunction, LabelledPolytope, affine_range

A_SWITCH = 1e-4
SERIES_DEGREE = 6
_SERIES_AT_MAX = 1e-3


@dataclass(frozen=True)
class WeightParams:
    """Parameters ``(lambda, a, b)`` or ``(epsilon, a, b)``.

    ``tag`` says which of the two the first slot holds; ``lambda = 1/epsilon``.
    """

    value: float
    a: float
    b: float = 0.0
    tag: str = "lambda"

    def __post_init__(self):
        if self.tag not in ("lambda", "epsilon"):
            raise ValueError(f"tag must be 'lambda' or 'epsilon', got {self.tag!r}")

    @property
    def lam(self) -> float:
        if self.tag == "lambda":
            return self.value
        if self.value == 0:
            raise ZeroDivisionError("lambda = 1/epsilon is undefined at epsilon = 0")
        return 1.0 / self.value

    @property
    def eps(self) -> float:
        if self.tag == "epsilon":
            return self.value
        if self.value == 0:
            raise ZeroDivisionError("epsilon = 1/lambda is undefined at lambda = 0")
        return 1.0 / self.value

    @property
    def analytic_branch(self) -> bool:
        """True on the ``a = 0`` analytic-extension branch."""
        return self.a == 0

    def as_lambda(self) -> "WeightParams":
        return WeightParams(self.lam, self.a, self.b, "lambda")

    def as_epsilon(self) -> "WeightParams":
        return WeightParams(self.eps, self.a, self.b, "epsilon")


def _log1p_over_a(a: float, t: np.ndarray) -> np.ndarray:
    """``log(1 + a t)/a`` with its limit ``t`` at ``a = 0``."""
    if a == 0:
        return t.astype(float, copy=True)
    at = a * t
    if abs(a) < A_SWITCH:
        series = np.zeros_like(t, dtype=float)
        # Horner in (a t): sum_{j=1}^{7} (-1)^{j+1} (a t)^{j-1} t / j
        for j in range(SERIES_DEGREE + 1, 0, -1):
            series = series * at + (-1.0) ** (j + 1) / j
        series = series * t
        closed = np.log1p(at) / a
        return np.where(np.abs(at) <= _SERIES_AT_MAX, series, closed)
    return np.log1p(at) / a


def _check_domain(a: float, t: np.ndarray):
    base = 1.0 + a * t
    if np.any(base <= 0):
        bad = np.asarray(t).ravel()[np.argmin(np.asarray(base).ravel())]
        raise DomainViolation(f"1 + a*t <= 0 at a={a!r}, t={bad!r}", value=float(bad))


def F(k: int, a: float, t):
    """``F_k(a, t)``; scalar in, scalar out, arrays broadcast."""
    scalar = np.isscalar(t)
    t = np.asarray(t, dtype=float)
    a = float(a)
    _check_domain(a, t)
    out = np.exp((1.0 - k * a) * _log1p_over_a(a, t))
    return float(out) if scalar else out


def F_minus_one(k: int, a: float, t):
    """``F_k(a, t) - 1`` without cancellation for small ``t``."""
    scalar = np.isscalar(t)
    t = np.asarray(t, dtype=float)
    a = float(a)
    _check_domain(a, t)
    out = np.expm1((1.0 - k * a) * _log1p_over_a(a, t))
    return float(out) if scalar else out


def dt_factor(j: int, k: int, a: float) -> float:
    """``prod_{i=1}^{j} (1 - (i + k - 1) a)``."""
    out = 1.0
    for i in range(1, j + 1):
        out *= 1.0 - (i + k - 1) * a
    return out


def F_dt(j: int, k: int, a: float, t):
    """j-th t-derivative of ``F_k(a, t)``, which is a multiple of ``F_{j+k}``."""
    if j < 1:
        raise ValueError("derivative order must be >= 1")
    return dt_factor(j, k, a) * F(j + k, a, t)


def taylor_defect(k: int, a: float, t):
    """Remainder ``F_k(a,t) - e^t (1 + a(-t^2/2 - k t))``, which is O(a^2)."""
    t_arr = np.asarray(t, dtype=float)
    out = F(k, a, t_arr) - np.exp(t_arr) * (1.0 + a * (-0.5 * t_arr**2 - k * t_arr))
    return float(out) if np.isscalar(t) else out


def sasaki_weight_pair(P: LabelledPolytope, ell: AffineFunction, n: int, kappa: float):
    """Weights ``v = l^-(n+1)``, ``w = kappa l^-(n+2)`` of a transversal cscS problem.

    ``ell`` must be positive on ``P`` (checked exactly at the vertices).
    """
    lo, _ = affine_range(P, ell)
    if not lo > 0:
        raise ReebPositivityViolation(f"affine function {ell} is not positive on P (min {float(lo)!r})")
    ell_f = ell.as_float()

    def v(x):
        return ell_f(np.asarray(x, dtype=float)) ** (-(n + 1))

    def w(x):
        return kappa * ell_f(np.asarray(x, dtype=float)) ** (-(n + 2))

    return v, w
