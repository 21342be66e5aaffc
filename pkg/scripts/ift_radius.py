"""Estimate how far in eps (at a = 0) the concave critical-point branch reaches.

Bisects on the largest eps for which continuation from the extremal seed
succeeds with a negative definite Hessian, for every polytope in data/ plus
the simplices of dimension 2 and 3.
"""

import argparse
from pathlib import Path

from conekit.errors import ContinuationStalled, SolverError
from conekit.polytope import load_polytope, simplex
from conekit.solver import continuation

DATA = Path(__file__).resolve().parents[1] / "data"


def reaches(P, eps, steps):
    try:
        continuation(P, (eps, 0.0), steps=steps, require_concave=True)
        return True
    except (ContinuationStalled, SolverError):
        return False


def radius(P, hi=1.0, steps=16, iters=14):
    lo = 0.0
    while reaches(P, hi, steps):
        lo, hi = hi, 2 * hi
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if reaches(P, mid, steps) else (lo, mid)
    return lo


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--steps", type=int, default=16)
    args = p.parse_args()
    polys = {f.stem: load_polytope(f) for f in sorted(DATA.glob("*.json"))}
    polys["simplex3"] = simplex(3)
    for name, P in polys.items():
        print(f"{name:>12}  eps_max ~ {radius(P, 0.2, args.steps):.4f}")


if __name__ == "__main__":
    main()
