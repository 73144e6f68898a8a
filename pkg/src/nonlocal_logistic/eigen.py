"""Principal eigenpairs of the discrete Dirichlet Laplacian and of -Delta + alpha.grad."""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import Field, Grid
from .operators import FlowSpec, advection_matrix, laplacian_matrix

MAX_ITER = 10_000
RAYLEIGH_TOL = 1e-10
RESIDUAL_TOL = 1e-10


class EigenNonConvergence(RuntimeError):
    pass


class ComplexEigenvalueError(EigenNonConvergence):
    """Rayleigh quotients kept oscillating: the dominant inverse mode is not real."""


@dataclass(frozen=True, eq=False)
class EigenPair:
    lambda1: float
    phi1: Field
    iterations: int = 0
    residual: float = 0.0


def inverse_power_iteration(M: sp.spmatrix, start: np.ndarray, max_iter: int = MAX_ITER):
    """Smallest-magnitude eigenpair of ``M`` by inverse iteration with one LU factorisation.

    Returns ``(mu, x, iterations, residual)`` with ``x`` scaled to unit sup norm and
    positive largest entry.  Stops when successive Rayleigh quotients agree to
    ``RAYLEIGH_TOL`` (relative) and ``|Mx - mu x|_inf`` reaches ``RESIDUAL_TOL`` or
    the rounding floor of ``M``, whichever is larger.
    """
    lu = spla.splu(sp.csc_matrix(M))
    res_tol = max(RESIDUAL_TOL, 16 * np.finfo(float).eps * spla.norm(M, np.inf))
    x = np.asarray(start, dtype=float)
    x = x / np.max(np.abs(x))
    mu_prev = None
    history = []
    for it in range(1, max_iter + 1):
        y = lu.solve(x)
        k = np.argmax(np.abs(y))
        x = y / y[k]
        Mx = M @ x
        mu = float(x @ Mx / (x @ x))
        history.append(mu)
        res = float(np.max(np.abs(Mx - mu * x)))
        if (
            mu_prev is not None
            and abs(mu - mu_prev) <= RAYLEIGH_TOL * max(1.0, abs(mu))
            and res <= res_tol
        ):
            return mu, x, it, res
        mu_prev = mu
    if _oscillating(history[-50:]):
        raise ComplexEigenvalueError(
            f"Rayleigh quotient oscillates after {max_iter} iterations "
            f"(last values {history[-3:]})"
        )
    raise EigenNonConvergence(f"inverse iteration did not converge in {max_iter} steps")


def _oscillating(values) -> bool:
    d = np.diff(values)
    if d.size < 4:
        return False
    flips = np.sum(np.sign(d[1:]) != np.sign(d[:-1]))
    return flips > 0.5 * (d.size - 1)


def principal_eigenpair(grid: Grid) -> EigenPair:
    key = (grid, None)
    with _lock:
        cached = _cache.get(key)
    if cached is not None:
        return cached
    A = laplacian_matrix(grid)
    mu, x, its, res = inverse_power_iteration(A, np.ones(A.shape[0]))
    if np.min(x) <= 0:
        raise EigenNonConvergence("principal eigenvector is not positive")
    pair = EigenPair(mu, _embed(grid, x), its, res)
    with _lock:
        _cache[key] = pair
    return pair


def principal_eigenvalue_advection(grid: Grid, flow: FlowSpec) -> float:
    """Principal eigenvalue of -Delta_h + alpha . grad_h (central differences)."""
    nodal = flow.nodal(grid)
    if not np.any(nodal):
        return principal_eigenpair(grid).lambda1
    key = (grid, nodal.tobytes())
    with _lock:
        cached = _cache.get(key)
    if cached is not None:
        return cached
    L = (laplacian_matrix(grid) + advection_matrix(grid, nodal, "central")).tocsc()
    mu, _, _, _ = inverse_power_iteration(L, np.ones(L.shape[0]))
    with _lock:
        _cache[key] = mu
    return mu


def _embed(grid: Grid, interior: np.ndarray) -> Field:
    full = np.zeros(grid.size)
    full[grid.interior_mask] = interior
    return Field(grid, full)


_cache: dict = {}
_lock = threading.Lock()


def clear_cache() -> None:
    with _lock:
        _cache.clear()
