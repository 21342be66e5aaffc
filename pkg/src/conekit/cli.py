"""Command-line front end.

Exit codes: 0 ok, 2 input error, 3 numerical failure, 4 continuation stalled,
5 wrong sign of the transversal constant.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field

import numpy as np

from . import functionals as fn
from . import solver as sv
from .errors import ConekitError, ContinuationStalled, NonNormalizedInput, QuadratureNotConverged, SolverError
from .pipeline import WrongSign, cone_construct, k0_search, ratio_fit, report_sasaki_metadata
from .polytope import AffineFunction, QuadratureSpec, load_polytope

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_STALLED, EXIT_SIGN = 0, 2, 3, 4, 5

log = logging.getLogger("conekit")


@dataclass
class RunConfig:
    command: str
    input_path: str | None = None
    output_path: str | None = None
    quadrature: QuadratureSpec = field(default_factory=QuadratureSpec)
    tolerances: dict = field(default_factory=lambda: {"grad": sv.TOL_GRAD, "futaki": sv.TOL_FUTAKI})
    sweep: tuple | None = None

    def __post_init__(self):
        bad = {k: v for k, v in self.tolerances.items() if not v > 0}
        if bad:
            raise ValueError(f"tolerances must be positive: {bad}")
        if self.sweep is not None and self.sweep[0] > self.sweep[1]:
            raise ValueError(f"empty sweep range {self.sweep[0]}:{self.sweep[1]}")

    def header(self) -> dict:
        d = asdict(self)
        d["gauss_points"] = fn.GAUSS_POINTS
        d["max_newton"] = sv.MAX_NEWTON
        d["max_halvings"] = sv.MAX_HALVINGS
        return d


def _parse_sweep(text: str) -> tuple[int, int]:
    try:
        lo, hi = text.split(":")
        return int(lo), int(hi)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected LO:HI, got {text!r}") from exc


def _parse_vector(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="conekit", description="Weighted Einstein-Hilbert functionals on toric polytopes.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--polytope", required=True, help="polytope JSON file")
        sp.add_argument("--out", help="output file (default: stdout)")
        sp.add_argument("--tol-grad", type=float, default=sv.TOL_GRAD)

    common(sub.add_parser("extremal", help="extremal affine function and mean scalar curvature"))

    sp = sub.add_parser("eval", help="rescaled functional, gradient and Hessian at a point")
    common(sp)
    sp.add_argument("--eps", type=float, default=0.0)
    sp.add_argument("--a", type=float, default=0.0)
    sp.add_argument("--b", type=float, default=0.0)
    sp.add_argument("--xi", type=_parse_vector, help="gradient of l (default: the normalized extremal function)")
    sp.add_argument("--c", type=float, help="constant term of l; must make l normalized")

    sp = sub.add_parser("continue", help="path-follow from (0,0) to (eps,a), CSV trace")
    common(sp)
    sp.add_argument("--eps", type=float, required=True)
    sp.add_argument("--a", type=float, required=True)
    sp.add_argument("--steps", type=int, default=16)

    sp = sub.add_parser("cone", help="Reeb polarization and transversal constant")
    common(sp)
    sp.add_argument("--n", type=int, required=True, help="complex dimension of the base")
    sp.add_argument("--k", type=int)
    sp.add_argument("--N", type=int)
    sp.add_argument("--genus", type=int)
    sp.add_argument("--k-sweep", type=_parse_sweep)
    sp.add_argument("--jobs", type=int, default=1)
    sp.add_argument("--steps", type=int, default=16)

    sp = sub.add_parser("verify", help="run the invariant checks on a polytope")
    common(sp)
    sp.add_argument("--samples", type=int, default=20)
    return p


def _emit(text: str, path: str | None):
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def cmd_extremal(args, cfg: RunConfig) -> int:
    P = load_polytope(args.polytope)
    ext = fn.extremal_affine(P)
    out = ext.to_dict()
    out["ell_ext_exact"] = {"xi": [str(v) for v in ext.ell_ext.xi], "c": str(ext.ell_ext.c)}
    out["sbar_exact"] = str(ext.sbar)
    _emit(_dumps(out), cfg.output_path)
    return EXIT_OK


def cmd_eval(args, cfg: RunConfig) -> int:
    P = load_polytope(args.polytope)
    ctx = fn.context(P)
    if args.xi is None:
        ell = fn.extremal_affine(P).ell_ext_normalized.as_float()
    else:
        if len(args.xi) != P.dim:
            raise ValueError(f"--xi has {len(args.xi)} entries, polytope dimension is {P.dim}")
        ell = ctx.coords.affine(np.array(args.xi))
        if args.c is not None:
            ell = AffineFunction(ell.xi, args.c)
    theta = ell.gradient()
    out = {
        "eps": args.eps, "a": args.a, "b": args.b,
        "ell": ell.to_dict(),
        "EH_tilde": fn.EH_tilde(P, args.eps, args.a, args.b, ell),
        "gradient": [float(v) for v in fn.gradient_theta(ctx, args.eps, args.a, args.b, theta)],
        "hessian": [[float(v) for v in row] for row in fn.hessian_theta(ctx, args.eps, args.a, args.b, theta)],
        "domain_margin": sv._margin(ctx, args.eps, args.a, theta),
    }
    _emit(_dumps(out), cfg.output_path)
    return EXIT_OK


CSV_COLUMNS = ["step", "eps", "a", "b"]


def _csv_rows(path_steps, dim):
    for j, (eps, a, rep) in enumerate(path_steps, start=1):
        yield [j, repr(eps), repr(a), repr(rep.b)] + [repr(float(v)) for v in rep.ell.xi] + [
            repr(float(rep.ell.c)), repr(rep.gradient_residual), repr(rep.futaki_residuals[-1])]


def cmd_continue(args, cfg: RunConfig) -> int:
    P = load_polytope(args.polytope)
    if args.steps < 1:
        raise ValueError("--steps must be >= 1")
    status, steps, err = EXIT_OK, None, None
    try:
        path = sv.continuation(P, (args.eps, args.a), args.steps, cfg.tolerances["futaki"], cfg.tolerances["grad"])
        steps = path.steps
    except ContinuationStalled as exc:
        status, err = EXIT_STALLED, exc
        steps = exc.path.steps if exc.path is not None else []
    cols = CSV_COLUMNS + [f"xi{i}" for i in range(P.dim)] + ["c", "grad_residual", "futaki_1_residual"]
    fh = open(cfg.output_path, "w", newline="") if cfg.output_path else sys.stdout
    try:
        fh.write("# " + json.dumps({**cfg.header(), "target": [args.eps, args.a], "steps": args.steps}) + "\n")
        if err is not None:
            fh.write(f"# stalled: last good (eps, a) = {list(err.last_good)!r}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        w.writerows(_csv_rows(steps, P.dim))
    finally:
        if fh is not sys.stdout:
            fh.close()
    if err is not None:
        print(f"conekit: {err}", file=sys.stderr)
    return status


def cmd_cone(args, cfg: RunConfig) -> int:
    P = load_polytope(args.polytope)
    if args.k_sweep is not None:
        lo, hi = args.k_sweep
        res = k0_search(P, args.n, hi, k_min=lo, jobs=args.jobs, steps=args.steps)
        out = res.to_dict()
        out["ratio2_fit_C"] = ratio_fit(res.records, args.n)
        out["failures_after_k0"] = res.failures_after_k0
        _emit(_dumps(out), cfg.output_path)
        summary = f"k0 = {res.k0}" if res.found else f"k0 not found in [{lo}, {hi}]"
        print(summary, file=sys.stderr)
        return EXIT_OK
    if args.genus is not None and args.N is None:
        raise ValueError("--genus needs --N")
    if args.genus is None and args.k is None and args.N is None:
        raise ValueError("give --k, --N with --genus, or --k-sweep")
    kw = dict(steps=args.steps, tol_futaki=cfg.tolerances["futaki"], tol=cfg.tolerances["grad"])
    try:
        if args.genus is not None:
            sol = cone_construct(P, args.n, N=args.N, genus=args.genus, **kw)
        else:
            sol = cone_construct(P, args.n, args.k, N=args.N, **kw)
        status = EXIT_OK
    except WrongSign as exc:
        sol, status = exc.solution, EXIT_SIGN
        print(f"conekit: {exc}", file=sys.stderr)
    out = sol.to_dict()
    out["metadata"] = report_sasaki_metadata(sol, P=P)
    _emit(_dumps(out), cfg.output_path)
    return status


def _seeded_rng() -> np.random.Generator:
    seed = os.environ.get("CONEKIT_SEED")
    return np.random.default_rng(int(seed) if seed is not None else 0)


def verify_checks(P, samples: int = 20, rng: np.random.Generator | None = None) -> list[tuple[str, bool, str]]:
    """Invariant checks on ``P``; returns ``(name, passed, detail)`` triples."""
    from .weights import F

    rng = rng or _seeded_rng()
    ctx = fn.context(P)
    ext = fn.extremal_affine(P)
    out = []

    sbar = 2 * P.boundary_measure / P.volume
    fut = fn.futaki_vw(P, 1.0, float(sbar), AffineFunction.constant(1.0, P.dim))
    out.append(("mean scalar balances Fut(1)", abs(fut) <= 1e-10, f"{fut:.3e}"))

    res = max(abs(v) for v in ext.residuals)
    out.append(("extremal residuals", res <= 1e-10, f"{res:.3e}"))

    integral = P.integrate_polynomial(lambda x: ext.ell_ext(x))
    out.append(("int l_ext = 2 sigma", integral == 2 * P.boundary_measure, str(integral)))

    H = fn.hessian_theta(ctx, 0.0, 0.0, 0.0, ext.ell_ext_normalized.as_float().gradient())
    eig = float(np.max(np.linalg.eigvalsh(H)))
    out.append(("limit Hessian negative definite", eig < 0, f"max eig {eig:.3e}"))

    g = fn.gradient_theta(ctx, 0.0, 0.0, 0.0, ext.ell_ext_normalized.as_float().gradient())
    out.append(("limit gradient vanishes at extremal", float(np.linalg.norm(g)) <= 1e-9, f"{np.linalg.norm(g):.3e}"))

    a = rng.uniform(-0.5, 0.5, samples)
    t = rng.uniform(-0.9, 0.9, samples)
    dev = max(max(abs(F(0, ai, ti) - F(1, ai, ti) * (1 + ai * ti)) / abs(F(0, ai, ti)),
                  abs(F(1, ai, ti) - F(2, ai, ti) - ai * ti * F(2, ai, ti)) / abs(F(1, ai, ti)))
              for ai, ti in zip(a, t))
    out.append(("F_k recursion identities", dev <= 1e-12, f"{dev:.3e}"))

    worst = 0.0
    for _ in range(samples):
        theta = rng.normal(size=P.dim)
        q = rng.normal(size=P.dim)
        eps, aa, b = rng.uniform(0.01, 0.1), rng.uniform(-0.05, 0.05), rng.uniform(-0.5, 0.5)
        if sv._margin(ctx, eps, aa, theta) <= 0.05:
            continue
        h = 1e-5
        ell_p, ell_m = ctx.coords.affine(theta + h * q), ctx.coords.affine(theta - h * q)
        fd = (fn.EH_tilde(P, eps, aa, b, ell_p) - fn.EH_tilde(P, eps, aa, b, ell_m)) / (2 * h)
        an = float(fn.gradient_theta(ctx, eps, aa, b, theta) @ q)
        worst = max(worst, abs(fd - an) / (1 + abs(an)))
    out.append(("gradient matches finite differences", worst <= 1e-6, f"{worst:.3e}"))
    return out


def cmd_verify(args, cfg: RunConfig) -> int:
    P = load_polytope(args.polytope)
    checks = verify_checks(P, args.samples)
    lines = [f"{'PASS' if ok else 'FAIL'}  {name}: {detail}" for name, ok, detail in checks]
    _emit("\n".join(lines) + "\n", cfg.output_path)
    return EXIT_OK if all(ok for _, ok, _ in checks) else EXIT_NUMERIC


COMMANDS = {
    "extremal": cmd_extremal,
    "eval": cmd_eval,
    "continue": cmd_continue,
    "cone": cmd_cone,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        cfg = RunConfig(
            command=args.command, input_path=args.polytope, output_path=args.out,
            tolerances={"grad": args.tol_grad, "futaki": sv.TOL_FUTAKI},
            sweep=getattr(args, "k_sweep", None),
        )
        return COMMANDS[args.command](args, cfg)
    except ContinuationStalled as exc:
        print(f"conekit: {exc}", file=sys.stderr)
        return EXIT_STALLED
    except (SolverError, QuadratureNotConverged, ArithmeticError) as exc:
        print(f"conekit: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, ValueError, NonNormalizedInput, ConekitError) as exc:
        print(f"conekit: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
