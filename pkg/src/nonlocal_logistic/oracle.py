"""Collocation reference for the 1D problem with a constant kernel.

Independent of the finite-difference machinery: the nonlocal integral is carried
as an extra state ``v' = c |u|^gamma`` with unknown end value ``I = v(x1)``, so

    u'' = alpha * d/dx(|u|^{p-1} u) - (lambda - I) u,   u(x0) = u(x1) = 0,
    v(x0) = 0,  v(x1) = I,

is an ordinary two-point BVP with one free parameter, solved by
:func:`scipy.integrate.solve_bvp`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_bvp


class OracleFailure(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class OracleSolution:
    sol: object
    integral: float
    x0: float
    x1: float

    def __call__(self, x) -> np.ndarray:
        return self.sol.sol(np.asarray(x, dtype=float))[0]


def collocation_oracle(lam: float, alpha: float = 0.0, p: float = 1.0, gamma: float = 1.0,
                       c: float = 1.0, x0: float = 0.0, x1: float = 1.0,
                       tol: float = 1e-9, mesh: int = 401) -> OracleSolution:
    if 1.0 < p < 2.0:
        raise OracleFailure("|u|^(p-1) is not smooth at u = 0 for 1 < p < 2; use p = 1 or p >= 2")
    L = x1 - x0
    lam1 = (np.pi / L) ** 2
    if not lam > lam1:
        raise OracleFailure("the positive branch starts at lambda1; nothing to solve")

    def rhs(x, y, par):
        u, du, _ = y
        I = par[0]
        au = np.abs(u)
        # d/dx(|u|^{p-1} u) = p |u|^{p-1} u'
        d2u = alpha * p * au ** (p - 1) * du - (lam - I) * u
        return np.vstack([du, d2u, c * au**gamma])

    def bc(ya, yb, par):
        return np.array([ya[0], yb[0], ya[2], yb[2] - par[0]])

    x = np.linspace(x0, x1, mesh)
    s = np.sin(np.pi * (x - x0) / L)
    I0 = lam - lam1
    # amplitude matching the alpha = 0, gamma = 1 solution as a starting guess
    amp = I0 / (c * 2 * L / np.pi)
    amp = max(amp, 1e-3) ** (1.0 / gamma) if gamma != 1 else max(amp, 1e-3)
    u = amp * s
    du = amp * np.pi / L * np.cos(np.pi * (x - x0) / L)
    v = c * np.concatenate([[0.0], np.cumsum(0.5 * (u[1:] ** gamma + u[:-1] ** gamma) * np.diff(x))])
    res = solve_bvp(rhs, bc, x, np.vstack([u, du, v]), p=[v[-1]], tol=tol, max_nodes=200_000)
    if not res.success:
        raise OracleFailure(res.message)
    return OracleSolution(res, float(res.p[0]), x0, x1)
