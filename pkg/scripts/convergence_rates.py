"""Print log-log convergence slopes of the expansions in a and of the IFT family in eps."""

import numpy as np

from conekit.functionals import EH, extremal_affine
from conekit.polytope import AffineFunction, LabelledPolytope
from conekit.solver import critical_point
from conekit.weights import WeightParams, taylor_defect


def slope(x, y):
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def main():
    P = LabelledPolytope([((1, 0), 0), ((0, 1), 0), ((0, -1), 1), ((-1, -1), 2)])
    a_vals = [1e-1, 1e-2, 1e-3, 1e-4]
    ts = np.linspace(-1, 1, 41)
    for k in (0, 1, 2):
        errs = [np.max(np.abs(taylor_defect(k, a, ts))) for a in a_vals]
        print(f"F_{k} Taylor defect slope in a: {slope(a_vals, errs):.3f}")

    ell = AffineFunction((0.3, -0.4), 0.1)
    diffs = [abs(EH(P, WeightParams(1.3, a, 0.25), ell) - EH(P, WeightParams(1.3, 0.0, 0.25), ell))
             for a in a_vals[1:]]
    print(f"EH(a) - EH(0) slope in a: {slope(a_vals[1:], diffs):.3f}")

    t0 = extremal_affine(P).ell_ext_normalized.as_float().gradient()
    eps_vals = [3e-2, 1e-2, 3e-3, 1e-3]
    dist = [np.linalg.norm(critical_point(P, e, 0.0, 0.0).theta - t0) for e in eps_vals]
    print(f"critical point drift slope in eps: {slope(eps_vals, dist):.3f}, "
          f"C = {max(d / e for d, e in zip(dist, eps_vals)):.3f}")


if __name__ == "__main__":
    main()
