"""Compare the constant supersolution level M with the exact amplitude for alpha = 0, K = 1.

On (0, 1) the solution is A sin(pi x) with A = pi (lambda - pi^2) / 2 for gamma = 1,
so A exceeds M = lambda once lambda > pi^3 / (pi - 2).
"""

from __future__ import annotations

import math

from nonlocal_logistic.eigen import principal_eigenpair
from nonlocal_logistic.grid import Domain, build_grid, sup_norm
from nonlocal_logistic.operators import ProblemParams
from nonlocal_logistic.solver import solve_positive


def main() -> None:
    n = 255
    lam1 = principal_eigenpair(build_grid(Domain.interval(), n)).lambda1
    print(f"crossover lambda / lambda1 = {math.pi**3 / (math.pi - 2) / math.pi**2:.4f}")
    for factor in (1.5, 2.0, 2.5, 2.75, 3.0, 4.0):
        params = ProblemParams(lam=factor * lam1, n=n)
        report = solve_positive(params)
        sup, m = sup_norm(report.solution), report.M
        flag = "within" if sup <= m else "EXCEEDS"
        print(f"lambda = {factor:4.2f} lambda1  sup u = {sup:9.4f}  M = {m:9.4f}  {flag}")


if __name__ == "__main__":
    main()
