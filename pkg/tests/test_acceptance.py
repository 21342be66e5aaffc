"""Acceptance criteria, one test per criterion.

Each test prints a single ``[PASS]``/``[FAIL]`` line, also collected into the
terminal summary.  Run alone with ``pytest tests/test_acceptance.py -s``.
"""

import json
import math
import time
from contextlib import contextmanager
from fractions import Fraction

import numpy as np

from conekit.functionals import (
    EH,
    V_a,
    context,
    extremal_affine,
    futaki_param,
    hessian_theta,
    oracle_scal_v_1d,
)
from conekit.pipeline import cone_construct, k0_search
from conekit.polytope import AffineFunction, interval, mean_scalar, simplex
from conekit.solver import critical_point, dfrak_db, solve_b
from conekit.weights import F, WeightParams

import acceptance_log
from conftest import corpus
from oracles import loglog_slope, trapezoid_extremal_sympy


class Criterion:
    def __init__(self, number: int, limit: float):
        self.number, self.limit = number, limit
        self.checks: dict[str, bool] = {}
        self.notes: list[str] = []

    def check(self, name: str, ok) -> bool:
        self.checks[name] = bool(ok)
        return bool(ok)

    def note(self, text: str):
        self.notes.append(text)


@contextmanager
def criterion(number: int, limit: float):
    c = Criterion(number, limit)
    t0 = time.perf_counter()
    error = None
    try:
        yield c
    except Exception as exc:  # recorded, then re-raised
        error = exc
        raise
    finally:
        dt = time.perf_counter() - t0
        c.check("runtime", dt < limit)
        failed = [k for k, v in c.checks.items() if not v]
        if error is not None:
            failed.append(f"{type(error).__name__}: {error}")
        detail = "; ".join(c.notes) or "ok"
        if failed:
            detail += " | failed: " + ", ".join(failed)
        acceptance_log.record(number, error is None and not failed, detail, dt, limit)
    assert not [k for k, v in c.checks.items() if not v], c.checks


def aff(*coeffs):
    return AffineFunction(tuple(float(v) for v in coeffs[:-1]), float(coeffs[-1]))


def trapezoid():
    return corpus()["trapezoid"]


def test_criterion_01_simplex_constants():
    with criterion(1, 1.0) as c:
        for n in range(1, 5):
            s = mean_scalar(simplex(n))
            c.check(f"n={n}", isinstance(s, Fraction) and s == 2 * n * (n + 1))
        c.note("sbar(simplex_n) = 2n(n+1) exactly for n = 1..4")


def test_criterion_02_extremal():
    with criterion(2, 1.0) as c:
        e1 = extremal_affine(interval()).ell_ext
        c.check("interval", e1.xi == (0,) and e1.c == 4)
        e2 = extremal_affine(simplex(2)).ell_ext
        c.check("triangle", tuple(e2.xi) == (0, 0) and e2.c == 12)
        got = extremal_affine(trapezoid()).ell_ext.as_float()
        c0, x0, y0 = trapezoid_extremal_sympy()
        err = max(abs(got.c - float(c0)), abs(got.xi[0] - float(x0)), abs(got.xi[1] - float(y0)))
        c.check("trapezoid", err <= 1e-10)
        c.note(f"trapezoid l_ext = {got.c:.10f} + {got.xi[1]:.10f} y, error {err:.1e}")


ORACLE_WEIGHTS = [
    lambda x: np.ones_like(x), lambda x: 1 + x, lambda x: 2 - x, lambda x: 1 + x**2,
    lambda x: (2 + x) ** 3, lambda x: 3 - x**3, lambda x: 1 + x + x**4, lambda x: (1.5 - x) ** 5,
    lambda x: 2 + x**6, lambda x: 1 + 0.5 * x - 0.3 * x**2, np.exp, lambda x: np.exp(-x),
    lambda x: np.exp(2 * x), lambda x: np.exp(-2 * x), lambda x: np.exp(0.5 * x - 0.2),
    lambda x: np.exp(3 * x), lambda x: 1 / (2 + x), lambda x: (1 + x) ** -3,
    lambda x: (1 + 0.5 * x) ** -4, lambda x: F(1, 0.2, x),
]


def test_criterion_03_one_dimensional_oracle():
    with criterion(3, 1.0) as c:
        worst = 0.0
        for v in ORACLE_WEIGHTS:
            for h in (aff(0, 1), aff(1, 0), aff(2, -1)):
                lhs, rhs = oracle_scal_v_1d(v, h)
                worst = max(worst, abs(lhs - rhs))
        c.check("20 weights", worst <= 1e-8)
        lhs, rhs = oracle_scal_v_1d(lambda x: np.ones_like(x), aff(0, 1))
        c.check("v=1 -> 4", abs(lhs - 4) <= 1e-8 and rhs == 4)
        lhs, rhs = oracle_scal_v_1d(np.exp, aff(0, 1))
        c.check("v=e^x -> 2(e+1)", abs(lhs - 2 * (math.e + 1)) <= 1e-8)
        c.note(f"max |lhs - rhs| = {worst:.1e} over {len(ORACLE_WEIGHTS)} weights x 3 test functions")


def test_criterion_04_first_variation():
    rng = np.random.default_rng(20240601)
    polys = [P for name, P in sorted(corpus().items())]
    with criterion(4, 10.0) as c:
        worst, count = 0.0, 0
        while count < 100:
            P = polys[count % len(polys)]
            lam, a, b = rng.uniform(-5, 5), rng.uniform(-0.3, 0.3), rng.uniform(-1, 1)
            ell = aff(*rng.uniform(-1, 1, P.dim + 1))
            q = aff(*rng.uniform(-1, 1, P.dim + 1))
            params = WeightParams(lam, a, b)
            h = 1e-6 * (1 + np.linalg.norm(np.r_[ell.gradient(), ell.c]))
            fd = (EH(P, params, ell + h * q) - EH(P, params, ell - h * q)) / (2 * h)
            fut = futaki_param(P, params, ell, q)
            worst = max(worst, abs(V_a(P, a, ell) * fd - fut) / (1 + abs(fut)))
            count += 1
        c.check("relative error", worst <= 1e-6)
        c.note(f"max relative error {worst:.1e} over {count} points")


def test_criterion_05_expansion_bounds():
    with criterion(5, 30.0) as c:
        a_vals = [1e-1, 1e-2, 1e-3, 1e-4]
        ts = np.linspace(-1, 1, 41)
        slopes = []
        for k in (0, 1, 2):
            errs = [np.max(np.abs(F(k, a, ts) - np.exp(ts) * (1 + a * (-ts**2 / 2 - k * ts)))) for a in a_vals]
            slopes.append(loglog_slope(a_vals, errs))
        c.check("F_k slope 2", all(abs(s - 2) <= 0.1 for s in slopes))

        P = trapezoid()
        lam, b = 1.3, 0.25
        ells = [aff(0.3, -0.4, 0.1), aff(-0.5, 0.2, 0.0), aff(0.1, 0.6, -0.3)]
        basis = [aff(1, 0, 0), aff(0, 1, 0)]
        a2 = [1e-2, 1e-3, 1e-4]

        def grad(a, ell):
            V = V_a(P, a, ell)
            return np.array([futaki_param(P, WeightParams(lam, a, b), ell, q) / V for q in basis])

        def hess(a, ell, h=1e-4):
            return np.array([(grad(a, ell + h * q) - grad(a, ell - h * q)) / (2 * h) for q in basis]).T

        diffs = {"C0": [], "C1": [], "C2": []}
        for a in a2:
            d0 = max(abs(EH(P, WeightParams(lam, a, b), l) - EH(P, WeightParams(lam, 0.0, b), l)) for l in ells)
            d1 = max(np.linalg.norm(grad(a, l) - grad(0.0, l)) for l in ells)
            d2 = max(np.linalg.norm(hess(a, l) - hess(0.0, l)) for l in ells)
            diffs["C0"].append(d0), diffs["C1"].append(d1), diffs["C2"].append(d2)
        eh_slopes = {k: loglog_slope(a2, v) for k, v in diffs.items()}
        c.check("EH slopes 1", all(abs(s - 1) <= 0.1 for s in eh_slopes.values()))
        c.note("F_k slopes " + ", ".join(f"{s:.3f}" for s in slopes))
        c.note("EH slopes " + ", ".join(f"{k} {s:.3f}" for k, s in eh_slopes.items()))


def test_criterion_06_concavity():
    with criterion(6, 5.0) as c:
        worst = -np.inf
        for name, P in sorted(corpus().items()):
            ctx = context(P)
            H = hessian_theta(ctx, 0.0, 0.0, 0.0, np.zeros(P.dim))
            bary = P.barycenter
            gram = np.array([[float(P.integrate_polynomial(
                lambda x, i=i, j=j: (x[i] - bary[i]) * (x[j] - bary[j]))) for j in range(P.dim)]
                for i in range(P.dim)])
            ref = -gram / float(P.volume)
            c.check(f"{name} gram", np.allclose(H, ref, rtol=1e-10, atol=1e-12))
            eig = float(np.max(np.linalg.eigvalsh(H)))
            c.check(f"{name} definite", eig < 0)
            worst = max(worst, eig)
        h1 = hessian_theta(context(interval()), 0.0, 0.0, 0.0, np.zeros(1))[0, 0]
        c.check("interval -1/12", abs(h1 + 1 / 12) <= 1e-12)
        c.note(f"Hessian = -gram/vol on {len(corpus())} polytopes, largest eigenvalue {worst:.3e}")


def test_criterion_07_seed_and_constraint():
    with criterion(7, 10.0) as c:
        P = trapezoid()
        rep = critical_point(P, 0.0, 0.0, 0.0, seed=np.zeros(2))
        ext = extremal_affine(P).ell_ext_normalized.as_float()
        err = float(np.linalg.norm(rep.theta - ext.gradient()))
        c.check("seed", rep.gradient_residual <= 1e-9 and err <= 1e-8)
        rb = solve_b(P, 0.0, 0.0)
        c.check("b = 0", rb.b == 0.0)
        slopes = {}
        for name, Q in sorted(corpus().items()):
            s = dfrak_db(Q, 0.0, 0.0, 0.0)
            slopes[name] = s * float(Q.volume)
            c.check(f"{name} dF/db", abs(s * float(Q.volume) - 1) <= 0.05)
        c.note(f"seed error {err:.1e}; vol * dF/db in [{min(slopes.values()):.4f}, {max(slopes.values()):.4f}]")


def run_criterion_8() -> str:
    rep = solve_b(trapezoid(), 0.05, -0.02)
    return json.dumps(rep.to_dict(), sort_keys=True)


def run_criterion_9(jobs: int = 4) -> str:
    P = trapezoid()
    res = k0_search(P, 2, 200, jobs=jobs)
    far = cone_construct(P, 2, 1000)
    return json.dumps({"sweep": res.to_dict(), "k1000": far.to_dict()}, sort_keys=True)


def run_criterion_10() -> str:
    return cone_construct(interval(), 1, N=10, genus=20).to_json()


def test_criterion_08_futaki_vanishing():
    with criterion(8, 60.0) as c:
        data = json.loads(run_criterion_8())
        res = data["futaki_residuals"]
        c.check("r+1 residuals", len(res) == 3 and max(abs(v) for v in res) <= 1e-9)
        c.note(f"b = {data['b']:.1e}, max Futaki residual {max(abs(v) for v in res):.1e}")


def test_criterion_09_positive_pipeline():
    with criterion(9, 600.0) as c:
        data = json.loads(run_criterion_9())
        sweep = data["sweep"]
        k0 = sweep["k0"]
        c.check("k0 found", k0 is not None and k0 <= 200)
        at_k0 = next((r for r in sweep["records"] if r["k"] == k0), None)
        c.check("kappa > 0", at_k0 is not None and at_k0["kappa"] > 0)
        c.check("ratio2 at k0", at_k0 is not None and 0.9 <= at_k0["ratio2"] <= 1.1)
        sbar = float(mean_scalar(trapezoid()))
        gap = abs(data["k1000"]["ratio1"] - sbar) / sbar
        c.check("ratio1 at k=1000", gap <= 0.05)
        c.note(f"k0 = {k0} (persistent to 200: {sweep['persistent']}), ratio2(k0) = {at_k0['ratio2']:.4f}, "
               f"|ratio1 - sbar|/sbar at k=1000 = {gap:.2e}")


def test_criterion_10_negative_pipeline():
    with criterion(10, 120.0) as c:
        data = json.loads(run_criterion_10())
        c.check("lambda", abs(data["lambda"] + 68.4) <= 1e-12)
        c.check("kappa < 0", data["kappa"] < 0 and data["sign"] == "negative")
        c.note(f"lambda = {data['lambda']:.4f}, kappa = {data['kappa']:.4f}")


def test_criterion_11_determinism(tmp_path):
    with criterion(11, 1200.0) as c:
        runs = []
        for attempt in range(2):
            context.cache_clear()
            extremal_affine.cache_clear()
            out = tmp_path / f"run{attempt}"
            out.mkdir()
            (out / "c8.json").write_text(run_criterion_8())
            (out / "c9.json").write_text(run_criterion_9())
            (out / "c10.json").write_text(run_criterion_10())
            runs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
        for name in runs[0]:
            c.check(name, runs[0][name] == runs[1][name])
        c.note("criteria 8-10 result files bitwise identical across two runs")
