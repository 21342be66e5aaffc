"""Critical points of the rescaled functional and continuation in ``(eps, a)``.

Unknowns live in normalized coordinates ``theta``: ``l = sum_i theta_i (x_i - xbar_i)``.
The constant ``b`` is fixed by an outer secant iteration on

    Frak(eps, a, b) = c_{1/eps,a}(eps l) + b / I_1(eps l) - d_{1/eps,a}(eps l),

with ``l = l_{eps,a,b}`` re-solved by Newton at every outer step.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    BranchLost,
    BSolveDiverged,
    ContinuationStalled,
    DomainViolation,
    HessianSingular,
    NewtonDiverged,
    NonNormalizedInput,
    SolverError,
)
from .functionals import (
    PolytopeContext,
    _scaled_state,
    context,
    domain_margin,
    extremal_affine,
    gradient_theta,
    hessian_theta,
    is_normalized,
)
from .polytope import AffineFunction, LabelledPolytope

log = logging.getLogger(__name__)

TOL_GRAD = 1e-10
TOL_FUTAKI = 1e-9
MAX_NEWTON = 50
MAX_B_ITER = 40
MAX_HALVINGS = 12
JUMP_TOL = 0.5
ARMIJO = 1e-4
COND_MAX = 1e12


@dataclass(frozen=True)
class SolveReport:
    eps: float
    a: float
    b: float
    theta: np.ndarray
    ell: AffineFunction
    gradient_residual: float
    futaki_residuals: tuple
    newton_iterations: int
    domain_margin: float
    regularized: bool = False
    max_hessian_eig: float = float("nan")

    @property
    def max_futaki(self) -> float:
        return max(abs(v) for v in self.futaki_residuals) if self.futaki_residuals else float("nan")

    def to_dict(self) -> dict:
        return {
            "eps": self.eps,
            "a": self.a,
            "b": self.b,
            "theta": [float(v) for v in self.theta],
            "ell": self.ell.to_dict(),
            "gradient_residual": self.gradient_residual,
            "futaki_residuals": [float(v) for v in self.futaki_residuals],
            "newton_iterations": self.newton_iterations,
            "domain_margin": self.domain_margin,
            "regularized": self.regularized,
            "max_hessian_eig": self.max_hessian_eig,
        }


@dataclass
class ContinuationPath:
    target: tuple
    steps: list = field(default_factory=list)
    schedule: list = field(default_factory=list)

    @property
    def final(self) -> SolveReport:
        return self.steps[-1][2]


def domain_guard(P: LabelledPolytope, a: float, ell_scaled: AffineFunction) -> float:
    return domain_margin(P, a, ell_scaled)


def _margin(ctx: PolytopeContext, eps: float, a: float, theta: np.ndarray) -> float:
    lv = eps * ((ctx.verts - ctx.xbar) @ theta)
    base = 1.0 + a * lv
    return float(np.min(np.minimum(base, 2.0 - base)))


def _seed_theta(P: LabelledPolytope, seed) -> np.ndarray:
    if seed is None:
        return extremal_affine(P).ell_ext_normalized.as_float().gradient()
    if isinstance(seed, AffineFunction):
        if not is_normalized(P, seed):
            raise NonNormalizedInput(f"seed {seed} is not normalized")
        return seed.gradient()
    return np.asarray(seed, dtype=float).copy()


def _futaki_residuals(ctx, eps, a, b, theta) -> tuple:
    st = _scaled_state(ctx, eps, a, theta)
    basis = st.futaki_vector(b)
    one = st.futaki(b, np.ones(len(ctx.xi)), np.ones(len(ctx.xb)))
    return tuple(float(v) for v in basis) + (float(one),)


def _newton(ctx: PolytopeContext, eps, a, b, theta, tol):
    """Damped Newton on the gradient; returns (theta, |g|, iterations, regularized)."""
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        return _newton_loop(ctx, eps, a, b, theta, tol)


def _newton_loop(ctx, eps, a, b, theta, tol):
    if not _margin(ctx, eps, a, theta) > 0:
        raise DomainViolation(f"seed outside the domain at eps={eps!r}, a={a!r}")
    g = gradient_theta(ctx, eps, a, b, theta)
    gnorm = float(np.linalg.norm(g))
    if not np.isfinite(gnorm):
        raise NewtonDiverged(f"non-finite gradient at the seed (eps={eps!r}, a={a!r})")
    regularized = False
    for it in range(MAX_NEWTON + 1):
        if gnorm <= tol:
            return theta, gnorm, it, regularized
        if it == MAX_NEWTON:
            break
        H = hessian_theta(ctx, eps, a, b, theta)
        if not np.all(np.isfinite(H)):
            raise NewtonDiverged(f"non-finite Hessian at eps={eps!r}, a={a!r}")
        evals = np.linalg.eigvalsh(H)
        if np.any((evals > -1e-12) & (evals <= 0)):
            H = H - 1e-10 * np.eye(len(theta))
            regularized = True
            evals = np.linalg.eigvalsh(H)
        if np.min(np.abs(evals)) == 0 or np.max(np.abs(evals)) / np.min(np.abs(evals)) > COND_MAX:
            raise HessianSingular(f"Hessian condition number exceeds {COND_MAX:g} at eps={eps!r}, a={a!r}")
        step = -np.linalg.solve(H, g)
        t = 1.0
        for _ in range(40):
            trial = theta + t * step
            if _margin(ctx, eps, a, trial) > 0:
                g_new = gradient_theta(ctx, eps, a, b, trial)
                n_new = float(np.linalg.norm(g_new))
                if np.isfinite(n_new) and n_new**2 <= (1.0 - 2.0 * ARMIJO * t) * gnorm**2:
                    break
            t *= 0.5
        else:
            if _margin(ctx, eps, a, theta + step) <= 0:
                raise DomainViolation(f"line search cannot stay inside the domain at eps={eps!r}, a={a!r}")
            if gnorm <= 100 * tol:
                # at the roundoff floor; no further decrease possible
                return theta, gnorm, it, regularized
            raise NewtonDiverged(f"line search failed at |g|={gnorm:.3e} (eps={eps!r}, a={a!r}, b={b!r})")
        theta, g, gnorm = trial, g_new, n_new
    raise NewtonDiverged(f"no convergence in {MAX_NEWTON} Newton steps (|g|={gnorm:.3e})")


def critical_point(P: LabelledPolytope, eps: float, a: float, b: float, seed=None, tol: float = TOL_GRAD) -> SolveReport:
    """Critical point of ``EH_tilde_{eps,a,b}`` on normalized affine functions."""
    ctx = context(P)
    theta, gnorm, its, reg = _newton(ctx, float(eps), float(a), float(b), _seed_theta(P, seed), tol)
    return SolveReport(
        eps=float(eps), a=float(a), b=float(b), theta=theta, ell=ctx.coords.affine(theta),
        gradient_residual=gnorm, futaki_residuals=_futaki_residuals(ctx, eps, a, b, theta),
        newton_iterations=its, domain_margin=_margin(ctx, eps, a, theta), regularized=reg,
    )


def frak(P: LabelledPolytope, eps: float, a: float, b: float, seed=None, tol: float = TOL_GRAD) -> tuple[float, SolveReport]:
    """``Frak(eps, a, b)`` together with the inner critical point it was evaluated at."""
    rep = critical_point(P, eps, a, b, seed, tol)
    st = _scaled_state(context(P), rep.eps, rep.a, rep.theta)
    return st.c + b / st.I1 - st.d, rep


def dfrak_db(P: LabelledPolytope, eps: float, a: float, b: float = 0.0, h: float = 1e-4, seed=None) -> float:
    """Central difference of ``Frak`` in ``b``."""
    fp, _ = frak(P, eps, a, b + h, seed)
    fm, _ = frak(P, eps, a, b - h, seed)
    return (fp - fm) / (2 * h)


def solve_b(P: LabelledPolytope, eps: float, a: float, seed=None, b0: float = 0.0,
            tol_futaki: float = TOL_FUTAKI, tol: float = TOL_GRAD) -> SolveReport:
    """Find ``b(eps, a)`` with ``Frak = 0``; afterwards Fut vanishes on every affine function."""
    ctx = context(P)
    theta = _seed_theta(P, seed)
    eps, a = float(eps), float(a)
    b = float(b0)
    f, rep = frak(P, eps, a, b, theta, tol)
    total_its = rep.newton_iterations
    # near the origin d Frak/db = 1/vol
    slope = 1.0 / _scaled_state(ctx, eps, a, rep.theta).I1
    target = 0.1 * tol_futaki
    for _ in range(MAX_B_ITER):
        st = _scaled_state(ctx, eps, a, rep.theta)
        if abs(f) * st.I2 <= target:
            break
        b_new = b - f / slope
        f_new, rep_new = frak(P, eps, a, b_new, rep.theta, tol)
        total_its += rep_new.newton_iterations
        if b_new != b and f_new != f:
            slope = (f_new - f) / (b_new - b)
        if not np.isfinite(slope) or slope == 0:
            raise BSolveDiverged(f"degenerate secant slope at eps={eps!r}, a={a!r}")
        b, f, rep = b_new, f_new, rep_new
    else:
        raise BSolveDiverged(f"b-solve did not converge (|Frak|={abs(f):.3e}) at eps={eps!r}, a={a!r}")
    return SolveReport(
        eps=eps, a=a, b=b, theta=rep.theta, ell=rep.ell, gradient_residual=rep.gradient_residual,
        futaki_residuals=_futaki_residuals(ctx, eps, a, b, rep.theta),
        newton_iterations=total_its, domain_margin=rep.domain_margin, regularized=rep.regularized,
    )


def max_hessian_eig(P: LabelledPolytope, eps: float, a: float, b: float, theta) -> float:
    """Largest Hessian eigenvalue of ``EH_tilde`` at ``theta``; negative on the concave branch."""
    ctx = context(P)
    with np.errstate(over="ignore", invalid="ignore"):
        H = hessian_theta(ctx, float(eps), float(a), float(b), np.asarray(theta, dtype=float))
    if not np.all(np.isfinite(H)):
        return float("nan")
    return float(np.max(np.linalg.eigvalsh(H)))


def continuation(P: LabelledPolytope, target, steps: int = 16, tol_futaki: float = TOL_FUTAKI,
                 tol: float = TOL_GRAD, require_concave: bool = False) -> ContinuationPath:
    """Follow ``(eps, a) = s * target`` for ``s`` from 0 to 1 from the extremal seed.

    Each step is seeded by linear extrapolation of the two previous solutions.
    The step is halved when the corrector fails or lands off the branch, i.e.
    ``|theta - predictor| > JUMP_TOL (1 + |theta_prev|)``; with
    ``require_concave`` a Hessian that is not negative definite also counts
    as leaving the branch.  The path stalls once the step drops below
    ``2**-MAX_HALVINGS / steps``.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    eps_t, a_t = float(target[0]), float(target[1])
    path = ContinuationPath(target=(eps_t, a_t))
    if eps_t == 0 and a_t == 0:
        steps = 1
    ctx = context(P)
    theta = extremal_affine(P).ell_ext_normalized.as_float().gradient()
    history = [(0.0, theta, 0.0)]
    s, ds_nominal = 0.0, 1.0 / steps
    ds_min = ds_nominal * 2.0**-MAX_HALVINGS
    ds = ds_nominal
    while s < 1.0:
        s_next = 1.0 if s + ds > 1.0 - 1e-12 else s + ds
        if len(history) >= 2:
            (s0, t0, b0), (s1, t1, b1) = history[-2], history[-1]
            r = (s_next - s1) / (s1 - s0)
            pred_t, pred_b = t1 + r * (t1 - t0), b1 + r * (b1 - b0)
            if not _margin(ctx, s_next * eps_t, s_next * a_t, pred_t) > 0:
                pred_t, pred_b = t1, b1
        else:
            pred_t, pred_b = history[-1][1], history[-1][2]
        fail = None
        try:
            rep = solve_b(P, s_next * eps_t, s_next * a_t, pred_t, pred_b, tol_futaki, tol)
        except (SolverError, DomainViolation) as exc:
            fail = exc
        else:
            prev = history[-1][1]
            jump = float(np.linalg.norm(rep.theta - pred_t))
            top = max_hessian_eig(P, rep.eps, rep.a, rep.b, rep.theta)
            if jump > JUMP_TOL * (1.0 + float(np.linalg.norm(prev))):
                fail = BranchLost(f"corrector jumped by {jump:.3e} at eps={rep.eps!r}, a={rep.a!r}")
            elif require_concave and not top < 0:
                fail = BranchLost(f"Hessian not negative definite at eps={rep.eps!r}, a={rep.a!r} (max eig {top:.3e})")
            else:
                rep = replace(rep, max_hessian_eig=top)
        if fail is not None:
            log.debug("continuation step to s=%r failed (%s); halving", s_next, fail)
            ds *= 0.5
            if ds < ds_min:
                last = (s * eps_t, s * a_t)
                raise ContinuationStalled(
                    f"continuation stalled after s={s!r} (last good eps={last[0]!r}, a={last[1]!r}): {fail}",
                    last_good=last, path=path,
                ) from fail
            continue
        path.steps.append((rep.eps, rep.a, rep))
        path.schedule.append(s_next)
        history.append((s_next, rep.theta, rep.b))
        s = s_next
        ds = min(2.0 * ds, ds_nominal)
    return path
