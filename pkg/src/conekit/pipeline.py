"""End-to-end constructions of Reeb polarizations and transversal cscS weights.

Everything lives on the base polytope ``P``; the ``k`` extra projective (or
curve) factors only enter through ``lambda`` and ``a = -1/N`` with ``N = n + k``.
The product polytope is never formed.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConekitError, ContinuationStalled, ReebPositivityViolation, SolverError
from .functionals import _scaled_state, context, gradient_theta
from .polytope import AffineFunction, LabelledPolytope, affine_range, mean_scalar
from .solver import TOL_FUTAKI, TOL_GRAD, continuation
from .weights import sasaki_weight_pair

log = logging.getLogger(__name__)

KAPPA_TOL = 1e-9


class WrongSign(ConekitError):
    """The transversal constant has the opposite sign to the one requested.

    The computed solution is attached so callers can still report it.
    """

    def __init__(self, message, solution=None):
        super().__init__(message)
        self.solution = solution


def lambda_for(k: int, n: int) -> float:
    """``lambda_N = 2k(k+1)/N`` with ``N = n + k``, the scale matched to ``(P^1)^k`` or ``P^k``."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    return 2.0 * k * (k + 1) / (n + k)


def lambda_for_genus(N: int, n: int, g: int) -> float:
    """``(N - n)(4 - 4g)/N`` for ``N - n`` curve factors of genus ``g``."""
    if g < 2:
        raise ValueError(f"genus must be >= 2 for a negative constant, got {g}")
    if N <= n:
        raise ValueError(f"need N > n, got N={N}, n={n}")
    return (N - n) * (4.0 - 4.0 * g) / N


def _sign(kappa: float, tol: float = KAPPA_TOL) -> str:
    if kappa > tol:
        return "positive"
    if kappa < -tol:
        return "negative"
    return "zero"


@dataclass(frozen=True)
class ReebSolution:
    n: int
    N: int
    k: int
    lam: float
    a: float
    b: float
    ell_lambdaN: AffineFunction
    ell_reeb: AffineFunction
    kappa: float
    ratio1: float
    ratio2: float
    residuals: dict
    sign: str
    genus: int | None = None
    reeb_min: float = float("nan")

    def weights(self, P: LabelledPolytope):
        """``(v, w)`` with ``v = l_reeb^-(N+1)`` and ``w = kappa l_reeb^-(N+2)``."""
        return sasaki_weight_pair(P, self.ell_reeb, self.N, self.kappa)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "N": self.N,
            "k": self.k,
            "lambda": self.lam,
            "a": self.a,
            "b": self.b,
            "ell_lambdaN": self.ell_lambdaN.to_dict(),
            "ell_reeb": self.ell_reeb.to_dict(),
            "kappa": self.kappa,
            "ratio1": self.ratio1,
            "ratio2": self.ratio2,
            "residuals": dict(self.residuals),
            "sign": self.sign,
            "genus": self.genus,
            "reeb_min": self.reeb_min,
        }

    def to_json(self) -> str:
        # repr-based float serialization round-trips exactly
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "ReebSolution":
        return cls(
            n=data["n"], N=data["N"], k=data["k"], lam=data["lambda"], a=data["a"], b=data["b"],
            ell_lambdaN=AffineFunction.from_dict(data["ell_lambdaN"]),
            ell_reeb=AffineFunction.from_dict(data["ell_reeb"]),
            kappa=data["kappa"], ratio1=data["ratio1"], ratio2=data["ratio2"],
            residuals=dict(data["residuals"]), sign=data["sign"], genus=data.get("genus"),
            reeb_min=data.get("reeb_min", float("nan")),
        )


def cone_construct(P: LabelledPolytope, n: int, k: int | None = None, *, N: int | None = None,
                   genus: int | None = None, sign_target: str | None = None, steps: int = 16,
                   tol_futaki: float = TOL_FUTAKI, tol: float = TOL_GRAD) -> ReebSolution:
    """Run the continuation to ``(1/lambda, -1/N)`` and assemble the Reeb data.

    Either ``k`` (projective factors, ``lambda = 2k(k+1)/N``) or ``N`` together
    with ``genus`` (curve factors, ``lambda = (N-n)(4-4g)/N``) selects the scale.
    ``sign_target`` defaults to ``"positive"`` for the first and ``"negative"``
    for the second; a mismatch raises :class:`WrongSign` carrying the solution.
    """
    if genus is not None:
        if N is None:
            raise ValueError("genus mode needs N")
        lam = lambda_for_genus(N, n, genus)
        k = N - n
        sign_target = sign_target or "negative"
    else:
        if k is None:
            if N is None:
                raise ValueError("give k, or N with genus")
            k = N - n
        N = n + k
        lam = lambda_for(k, n)
        sign_target = sign_target or "positive"
    if sign_target not in ("positive", "negative"):
        raise ValueError(f"sign_target must be 'positive' or 'negative', got {sign_target!r}")
    eps, a = 1.0 / lam, -1.0 / N

    path = continuation(P, (eps, a), steps, tol_futaki, tol)
    rep = path.final
    ctx = context(P)
    st = _scaled_state(ctx, rep.eps, rep.a, rep.theta)
    ell_lN = (rep.eps * rep.ell).as_float()
    ell_reeb = AffineFunction.constant(1.0, P.dim) - ell_lN / N

    kappa = st.d + lam * N
    ratio1 = st.B1 / st.I2
    ratio2 = st.I1 / st.I2
    residuals = {
        "gradient": float(np.linalg.norm(gradient_theta(ctx, rep.eps, rep.a, rep.b, rep.theta))),
        "futaki_max": rep.max_futaki,
        "futaki": [float(v) for v in rep.futaki_residuals],
        "domain_margin": rep.domain_margin,
        "max_hessian_eig": rep.max_hessian_eig,
    }
    lo, _ = affine_range(P, ell_reeb)
    sol = ReebSolution(
        n=n, N=N, k=k, lam=lam, a=a, b=rep.b, ell_lambdaN=ell_lN, ell_reeb=ell_reeb,
        kappa=float(kappa), ratio1=float(ratio1), ratio2=float(ratio2), residuals=residuals,
        sign=_sign(kappa), genus=genus, reeb_min=float(lo),
    )
    if not lo > 0:
        raise ReebPositivityViolation(f"Reeb function {ell_reeb} not positive on P (min {float(lo)!r})")
    if sol.sign != sign_target:
        raise WrongSign(f"kappa = {kappa!r} is not {sign_target}", solution=sol)
    return sol


@dataclass
class KRecord:
    k: int
    status: str
    kappa: float | None = None
    ratio1: float | None = None
    ratio2: float | None = None
    message: str = ""

    def to_dict(self) -> dict:
        return {"k": self.k, "status": self.status, "kappa": self.kappa,
                "ratio1": self.ratio1, "ratio2": self.ratio2, "message": self.message}


@dataclass
class K0Result:
    k0: int | None
    records: list = field(default_factory=list)

    @property
    def found(self) -> bool:
        return self.k0 is not None

    @property
    def persistent(self) -> bool:
        """Success at every tested ``k >= k0``."""
        if self.k0 is None:
            return False
        return all(r.status == "ok" for r in self.records if r.k >= self.k0)

    @property
    def failures_after_k0(self) -> list:
        if self.k0 is None:
            return []
        return [r.k for r in self.records if r.k >= self.k0 and r.status != "ok"]

    def to_dict(self) -> dict:
        return {"k0": self.k0, "found": self.found, "persistent": self.persistent,
                "records": [r.to_dict() for r in self.records]}


def _attempt(args) -> KRecord:
    P, n, k, steps = args
    try:
        sol = cone_construct(P, n, k, sign_target="positive", steps=steps)
    except WrongSign as exc:
        s = exc.solution
        return KRecord(k, "wrong-sign", s.kappa, s.ratio1, s.ratio2, str(exc))
    except ContinuationStalled as exc:
        return KRecord(k, "stalled", message=str(exc))
    except ReebPositivityViolation as exc:
        return KRecord(k, "reeb-violation", message=str(exc))
    except (SolverError, ConekitError) as exc:
        return KRecord(k, "error", message=f"{type(exc).__name__}: {exc}")
    res_ok = sol.residuals["futaki_max"] <= TOL_FUTAKI and sol.residuals["gradient"] <= 100 * TOL_GRAD
    return KRecord(k, "ok" if res_ok else "residual", sol.kappa, sol.ratio1, sol.ratio2)


def k0_search(P: LabelledPolytope, n: int, k_max: int, k_min: int = 1, jobs: int = 1,
              steps: int = 16) -> K0Result:
    """Least ``k`` in ``[k_min, k_max]`` for which :func:`cone_construct` succeeds with ``kappa > 0``.

    Every ``k`` in the range is attempted so the result also audits persistence
    above ``k0``.  Not finding one is reported through ``k0 = None``.
    """
    if k_max > 10_000:
        raise ValueError("k_max must be <= 10^4")
    if k_min < 1 or k_min > k_max:
        raise ValueError(f"empty k range [{k_min}, {k_max}]")
    tasks = [(P, n, k, steps) for k in range(k_min, k_max + 1)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_attempt, tasks))
    else:
        records = [_attempt(t) for t in tasks]
    k0 = next((r.k for r in records if r.status == "ok"), None)
    return K0Result(k0, records)


def report_sasaki_metadata(sol: ReebSolution, tol: float = KAPPA_TOL, P: LabelledPolytope | None = None) -> dict:
    """Summary of the Reeb ray and what the sign of ``kappa`` implies."""
    c = float(sol.ell_reeb.c)
    ray = (sol.ell_reeb / c).to_dict() if c > 0 else None
    if sol.kappa > tol:
        note = "scalar-flat cone polarization exists on this ray"
    elif sol.kappa < -tol:
        note = "negative transversal cscS; no scalar-flat cone claim"
    else:
        note = "borderline; increase k"
    out = {
        "ray": ray,
        "ray_note": None if ray is not None else "constant term <= 0; ray not normalizable to constant 1",
        "kappa": sol.kappa,
        "lambda": sol.lam,
        "N": sol.N,
        "annotation": note,
        "scope": "bookkeeping only; the Sasaki manifold, join and cone metric are not constructed",
    }
    if P is not None:
        out["sbar"] = float(mean_scalar(P))
    return out


def ratio_fit(records, n: int) -> float:
    """Fitted ``C`` in ``|ratio2 - 1| ~ C/N`` over the successful records."""
    ok = [r for r in records if r.status == "ok"]
    if not ok:
        return float("nan")
    return float(np.mean([abs(r.ratio2 - 1.0) * (n + r.k) for r in ok]))


__all__ = [
    "K0Result", "KRecord", "ReebSolution", "WrongSign", "cone_construct", "k0_search",
    "lambda_for", "lambda_for_genus", "ratio_fit", "report_sasaki_metadata",
]
