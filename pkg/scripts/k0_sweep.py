"""Sweep k on a polytope and print kappa and the two ratios per k.

    python3 scripts/k0_sweep.py data/trapezoid.json --n 2 --k-max 60 --jobs 4
"""

import argparse

from conekit.pipeline import k0_search, ratio_fit
from conekit.polytope import load_polytope, mean_scalar


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("polytope")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k-max", type=int, default=60)
    p.add_argument("--k-min", type=int, default=1)
    p.add_argument("--jobs", type=int, default=1)
    args = p.parse_args()

    P = load_polytope(args.polytope)
    res = k0_search(P, args.n, args.k_max, k_min=args.k_min, jobs=args.jobs)
    print(f"sbar = {float(mean_scalar(P)):.6f}")
    print(f"{'k':>5} {'status':>14} {'kappa':>14} {'ratio1':>10} {'ratio2':>10}")
    for r in res.records:
        if r.kappa is None:
            print(f"{r.k:>5} {r.status:>14}")
        else:
            print(f"{r.k:>5} {r.status:>14} {r.kappa:>14.6g} {r.ratio1:>10.5f} {r.ratio2:>10.6f}")
    print(f"k0 = {res.k0}, persistent = {res.persistent}, C(ratio2) = {ratio_fit(res.records, args.n):.4f}")


if __name__ == "__main__":
    main()
