"""Convergence of the advected solution to the alpha = 0 solution, p = 1 against p = 2.

Prints the C1 distance per halving of |alpha| and the ratio between consecutive
entries. For p = 2 the ratio only approaches 1/2 once alpha * sup u is small.
"""

from __future__ import annotations

import argparse

from nonlocal_logistic.eigen import principal_eigenpair
from nonlocal_logistic.experiments import SweepSpec, sweep_alpha_to_zero
from nonlocal_logistic.grid import Domain, build_grid
from nonlocal_logistic.operators import ConstantFlow, ProblemParams


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=255)
    ap.add_argument("--factor", type=float, default=2.0, help="lambda / lambda1")
    ap.add_argument("--halvings", type=int, default=8)
    args = ap.parse_args()

    lam1 = principal_eigenpair(build_grid(Domain.interval(), args.n)).lambda1
    values = tuple(2.0**-k for k in range(args.halvings + 1))
    for p in (1.0, 2.0):
        base = ProblemParams(lam=args.factor * lam1, p=p, flow=ConstantFlow((1.0,)), n=args.n)
        d = sweep_alpha_to_zero(SweepSpec(base, "alpha_magnitude", values), 0.1).column("c1_distance")
        print(f"p = {p:g}")
        for k, (a, dist) in enumerate(zip(values, d)):
            ratio = f"{dist / d[k - 1]:.3f}" if k else "-"
            print(f"  |alpha| = {a:<10.6g} C1 distance = {dist:.6g}  ratio = {ratio}")


if __name__ == "__main__":
    main()
