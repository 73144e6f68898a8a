from __future__ import annotations

import threading

import numpy as np
import pytest
import scipy.sparse as sp

from nonlocal_logistic.eigen import (
    ComplexEigenvalueError,
    EigenNonConvergence,
    clear_cache,
    inverse_power_iteration,
    principal_eigenpair,
    principal_eigenvalue_advection,
)
from nonlocal_logistic.grid import Domain, build_grid
from nonlocal_logistic.operators import ConstantFlow, rotational_flow


def discrete_lambda1(h: float) -> float:
    return 4 / h**2 * np.sin(np.pi * h / 2) ** 2


def discrete_lambda1_advected(h: float, alpha: float) -> float:
    """Tridiagonal Toeplitz eigenvalue b + 2 sqrt(ac) cos(pi h) of -D2 + alpha D1."""
    return 2 / h**2 - 2 * np.sqrt(1 / h**4 - alpha**2 / (4 * h**2)) * np.cos(np.pi * h)


@pytest.mark.parametrize("n", [7, 63, 255])
def test_interval_matches_discrete_formula(n):
    g = build_grid(Domain.interval(), n)
    pair = principal_eigenpair(g)
    assert pair.lambda1 == pytest.approx(discrete_lambda1(g.h), rel=1e-10)
    x = g.nodes[:, 0]
    assert np.allclose(pair.phi1.values, np.sin(np.pi * x) / np.sin(np.pi * x).max(), atol=1e-8)


def test_eigenpair_invariants():
    g = build_grid(Domain.interval(0.0, 2.0), 127)
    pair = principal_eigenpair(g)
    assert pair.lambda1 == pytest.approx(np.pi**2 / 4, rel=1e-4)
    assert np.max(np.abs(pair.phi1.values)) == pytest.approx(1.0)
    assert np.all(pair.phi1.interior() > 0)
    assert np.all(pair.phi1.values[g.boundary_mask] == 0)
    assert pair.residual <= 1e-8


def test_square_is_sum_of_axes():
    g = build_grid(Domain.rectangle(0, 1, 0, 2), 31)
    hx, hy = g.spacing
    lam1 = principal_eigenpair(g).lambda1
    # axis y has length 2, so its mode is sin(pi y / 2)
    exact = discrete_lambda1(hx) + 4 / hy**2 * np.sin(np.pi * hy / 4) ** 2
    assert lam1 == pytest.approx(exact, rel=1e-9)


@pytest.mark.parametrize("alpha", [0.5, 2.0, -3.0])
def test_advected_matches_toeplitz_formula(alpha):
    g = build_grid(Domain.interval(), 127)
    mu = principal_eigenvalue_advection(g, ConstantFlow((alpha,)))
    assert mu == pytest.approx(discrete_lambda1_advected(g.h, alpha), rel=1e-9)
    assert mu == pytest.approx(np.pi**2 + alpha**2 / 4, rel=1e-3)


def test_zero_flow_falls_back_to_laplacian():
    g = build_grid(Domain.interval(), 31)
    assert principal_eigenvalue_advection(g, ConstantFlow((0.0,))) == principal_eigenpair(g).lambda1


def test_rotational_flow_eigenvalue_is_real_and_above_lambda1():
    g = build_grid(Domain.rectangle(), 15)
    mu = principal_eigenvalue_advection(g, rotational_flow(g, 4.0))
    assert mu >= principal_eigenpair(g).lambda1 - 1e-9


def test_rotation_matrix_reports_complex_pair():
    M = sp.csr_matrix(np.array([[1.0, 2.0], [-2.0, 1.0]]))
    with pytest.raises(ComplexEigenvalueError):
        inverse_power_iteration(M, np.ones(2), max_iter=200)
    assert issubclass(ComplexEigenvalueError, EigenNonConvergence)


def test_cache_is_shared_across_threads():
    clear_cache()
    g = build_grid(Domain.interval(), 255)
    results = []
    threads = [threading.Thread(target=lambda: results.append(principal_eigenpair(g).lambda1))
               for _ in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert len(set(results)) == 1
