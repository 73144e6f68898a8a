from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from nonlocal_logistic.grid import Domain, build_grid, integrate, sup_norm
from nonlocal_logistic.operators import (
    BallKernel,
    ConstantFlow,
    ConstantKernel,
    Discretization,
    FieldFlow,
    GaussianKernel,
    KernelError,
    ProblemParams,
    TableKernel,
    advection_term,
    assemble_kernel,
    cell_peclet,
    laplacian_matrix,
    phi,
    residual,
    rotational_flow,
)

G1 = build_grid(Domain.interval(), 31)


def test_laplacian_discrete_eigenvectors():
    """-Delta_h sin(k pi x) = (4/h^2) sin^2(k pi h / 2) sin(k pi x), exactly."""
    g = build_grid(Domain.interval(), 63)
    A = laplacian_matrix(g)
    x = g.nodes[g.interior_mask, 0]
    for k in (1, 2, 7):
        s = np.sin(k * np.pi * x)
        mu = 4 / g.h**2 * np.sin(k * np.pi * g.h / 2) ** 2
        assert np.allclose(A @ s, mu * s, atol=1e-9 * mu)


def test_laplacian_spd_2d():
    g = build_grid(Domain.rectangle(0, 1, 0, 2), 6)
    A = laplacian_matrix(g).toarray()
    assert np.allclose(A, A.T)
    assert np.min(np.linalg.eigvalsh(A)) > 0


def test_constant_kernel_constants():
    W = assemble_kernel(ConstantKernel(3.0), G1)
    assert W.k0 == pytest.approx(3.0)
    assert W.kinf == 3.0
    assert W.positive_rows


def test_negative_table_kernel_rejected():
    K = np.ones((G1.size, G1.size))
    K[4, 5] = -1e-3
    with pytest.raises(KernelError, match="nonnegative"):
        assemble_kernel(TableKernel(K), G1)
    with pytest.raises(KernelError, match="shape"):
        assemble_kernel(TableKernel(np.ones((3, 3))), G1)


def test_ball_kernel_mass():
    g = build_grid(Domain.interval(), 99)
    W = assemble_kernel(BallKernel(0.25, 2.0), g)
    # the middle row sees 51 interior nodes, each with trapezoid weight h
    mid = g.size // 2
    assert W.row_mass[mid] == pytest.approx(2.0 * 51 * g.h, rel=1e-12)
    # a corner row sees its boundary node (weight h/2) plus 25 nodes
    assert W.k0 == pytest.approx(2.0 * (0.5 + 25) * g.h, rel=1e-12)


def test_phi_homogeneity_example():
    W = assemble_kernel(GaussianKernel(1.0, 0.3), G1)
    u = G1.evaluate(lambda x: np.sin(np.pi * x) - 0.3)
    assert np.allclose(phi(u * 2.0, 1.5, W).values, 2**1.5 * phi(u, 1.5, W).values, rtol=1e-12)


def test_phi_constant_kernel_is_integral():
    W = assemble_kernel(ConstantKernel(1.0), G1)
    u = G1.evaluate(lambda x: x * (1 - x))
    assert np.allclose(phi(u, 2.0, W).values, integrate(G1.field(u.values**2)))


field_values = arrays(np.float64, G1.size, elements=st.floats(-50, 50))


@given(field_values, st.floats(0.01, 20), st.sampled_from([0.5, 1.0, 2.0]))
def test_phi_laws_hold(vals, t, gamma):
    W = assemble_kernel(GaussianKernel(2.0, 0.2), G1)
    u = G1.field(vals).with_zero_boundary()
    lhs, rhs = phi(u * t, gamma, W).values, t**gamma * phi(u, gamma, W).values
    assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-300)
    bound = W.kinf * G1.domain.measure * sup_norm(u) ** gamma
    assert sup_norm(phi(u, gamma, W)) <= bound * (1 + 1e-12)


@given(field_values, field_values, st.sampled_from([0.5, 1.0, 2.0]))
def test_phi_lipschitz_type_bound(a, b, gamma):
    W = assemble_kernel(GaussianKernel(1.0, 0.5), G1)
    u, v = G1.field(a).with_zero_boundary(), G1.field(b).with_zero_boundary()
    lhs = sup_norm(phi(u, gamma, W) - phi(v, gamma, W))
    rhs = W.kinf * G1.domain.measure * np.max(np.abs(np.abs(u.values) ** gamma - np.abs(v.values) ** gamma))
    assert lhs <= rhs * (1 + 1e-12) + 1e-300


def _reference_residual(u, lam, gamma, p, alpha, K, grid):
    """Straight-line loop version of the 1D residual."""
    h = grid.h
    w = grid.weights
    n = grid.size
    out = np.zeros(n)
    crowd = [sum(K(grid.nodes[i, 0], grid.nodes[j, 0]) * w[j] * abs(u[j]) ** gamma
                 for j in range(n)) for i in range(n)]
    s = [np.sign(v) * abs(v) ** p for v in u]
    for i in range(1, n - 1):
        lap = -(u[i - 1] - 2 * u[i] + u[i + 1]) / h**2
        adv = alpha * (s[i + 1] - s[i - 1]) / (2 * h)
        out[i] = lap + adv - (lam - crowd[i]) * u[i]
    return out


@pytest.mark.parametrize("p,gamma,alpha", [(1.0, 1.0, 0.0), (2.0, 1.0, 1.5), (1.5, 0.5, -2.0)])
def test_residual_matches_reference(p, gamma, alpha):
    g = build_grid(Domain.interval(), 15)
    kern = GaussianKernel(1.5, 0.4)
    params = ProblemParams(lam=12.0, gamma=gamma, p=p, flow=ConstantFlow((alpha,)),
                           kernel=kern, n=15)
    u = g.evaluate(lambda x: np.sin(np.pi * x) * (1 + x) - 0.2 * np.sin(3 * np.pi * x))
    u = u.with_zero_boundary()
    got = residual(u, params).values
    K = lambda x, y: 1.5 * np.exp(-((x - y) ** 2) / (2 * 0.4**2))
    ref = _reference_residual(u.values, 12.0, gamma, p, alpha, K, g)
    assert np.allclose(got, ref, rtol=1e-12, atol=1e-10)


def test_residual_of_eigenfunction():
    g = build_grid(Domain.interval(), 63)
    x = g.nodes[:, 0]
    phi1 = g.field(np.sin(np.pi * x)).with_zero_boundary()
    lam_h = 4 / g.h**2 * np.sin(np.pi * g.h / 2) ** 2
    F = residual(phi1, ProblemParams(lam=0.0, n=63, flow=ConstantFlow((0.0,))))
    expected = (lam_h + integrate(phi1)) * phi1.values
    assert np.allclose(F.values, expected, atol=1e-9)


@pytest.mark.parametrize("p,gamma,scheme", [(1.0, 1.0, "central"), (2.0, 1.0, "upwind"),
                                            (1.5, 2.0, "central"), (2.5, 0.5, "upwind")])
def test_jacobian_matches_finite_differences(p, gamma, scheme):
    params = ProblemParams(lam=15.0, gamma=gamma, p=p, flow=ConstantFlow((2.0,)),
                           kernel=GaussianKernel(1.0, 0.3), n=12)
    disc = Discretization.build(params)
    rng = np.random.default_rng(1)
    v = 0.5 + rng.uniform(size=12)
    J = disc.jacobian(v, params.lam, gamma, p, scheme)
    eps = 1e-6
    Jfd = np.empty_like(J)
    for k in range(v.size):
        e = np.zeros_like(v)
        e[k] = eps
        Jfd[:, k] = (disc.residual_vec(v + e, 15.0, gamma, p, scheme)
                     - disc.residual_vec(v - e, 15.0, gamma, p, scheme)) / (2 * eps)
    assert np.allclose(J, Jfd, rtol=1e-6, atol=1e-4)


def test_discrete_boundary_identity_example():
    g = build_grid(Domain.interval(), 255)
    u = g.evaluate(lambda x: np.sin(np.pi * x) * np.exp(x))
    adv = advection_term(u, 2.0, ConstantFlow((1.0,)))
    integrand = g.field(2 / 3 * u.values * adv.values)
    assert abs(integrate(integrand)) <= 1e-3


def test_upwind_and_central_agree_to_first_order():
    diffs = []
    for n in (63, 127, 255):
        g = build_grid(Domain.interval(), n)
        u = g.evaluate(lambda x: np.sin(np.pi * x))
        flow = ConstantFlow((1.0,))
        d = advection_term(u, 2.0, flow, "upwind") - advection_term(u, 2.0, flow, "central")
        diffs.append(np.max(np.abs(d.interior())))
    assert diffs[1] < 0.6 * diffs[0] and diffs[2] < 0.6 * diffs[1]


def test_rotational_flow_is_discretely_solenoidal():
    g = build_grid(Domain.rectangle(), 15)
    flow = rotational_flow(g, 4.0)
    assert np.max(np.abs(flow.divergence().values)) < 1e-12
    shear = FieldFlow((g.evaluate(lambda x, y: x), g.zeros()))
    assert np.allclose(shear.divergence().values, 1.0)


def test_cell_peclet():
    g = build_grid(Domain.interval(), 99)
    assert cell_peclet(g, ConstantFlow((4.0,)), 2.0, 5.0) == pytest.approx(4 * 2 * 5 * 0.01 / 2)


def test_params_validation():
    with pytest.raises(ValueError, match="gamma"):
        ProblemParams(lam=1.0, gamma=0.0)
    with pytest.raises(ValueError, match="p must"):
        ProblemParams(lam=1.0, p=0.5)
    assert ProblemParams(lam=1.0).flow.components == (0.0,)
    assert ProblemParams(lam=1.0).replace(p=1.0).p == 1.0
    with pytest.raises(ValueError):
        Discretization.build(ProblemParams(lam=1.0, flow=ConstantFlow((1.0, 0.0))))
