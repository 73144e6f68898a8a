from __future__ import annotations

import numpy as np
import pytest

from nonlocal_logistic.eigen import principal_eigenpair, principal_eigenvalue_advection
from nonlocal_logistic.experiments import (
    ExperimentError,
    NonSolenoidalFlow,
    SweepSpec,
    divergence_free_case,
    estimate_alpha_nonexistence_p1,
    strictly_decreasing,
    sweep_alpha_to_infinity,
    sweep_alpha_to_zero,
    sweep_p_to_one,
    threshold_bisect,
    trace_branch,
)
from nonlocal_logistic.grid import Domain, build_grid
from nonlocal_logistic.operators import ConstantFlow, FieldFlow, ProblemParams, rotational_flow

N = 63
L1 = principal_eigenpair(build_grid(Domain.interval(), N)).lambda1
BASE = ProblemParams(lam=2 * L1, p=2.0, flow=ConstantFlow((1.0,)), n=N)


def test_sweep_spec_validation():
    with pytest.raises(ExperimentError, match="monotone"):
        SweepSpec(BASE, "p", (1.5, 1.2, 1.3))
    with pytest.raises(ExperimentError):
        SweepSpec(BASE, "gamma", (1.0,))
    with pytest.raises(ExperimentError):
        SweepSpec(BASE, "p", ())


def test_threshold_degenerate_range():
    with pytest.raises(ExperimentError):
        threshold_bisect(BASE, 10.0, 10.0)


@pytest.mark.parametrize("alpha", [0.0, 1.0])
def test_threshold_near_lambda1(alpha):
    res = threshold_bisect(BASE.replace(flow=ConstantFlow((alpha,))), 0.5 * L1, 2 * L1)
    assert res.width <= 1e-2 * L1
    assert abs(res.lambda_star - L1) <= res.width
    assert res.relative_gap <= 0.05


def test_alpha_to_zero_sweep_with_zero_entry():
    spec = SweepSpec(BASE.replace(p=1.0), "alpha_magnitude", (1.0, 0.5, 0.25, 0.0))
    res = sweep_alpha_to_zero(spec)
    assert res.rows[-1][1] == 0.0 and res.rows[-1][2] == 0.0
    assert strictly_decreasing(res.column("c1_distance"))


def test_alpha_to_zero_p1_halves_distance():
    """p = 1: the transport perturbation is linear in alpha, so halving alpha halves the distance."""
    spec = SweepSpec(BASE.replace(p=1.0), "alpha_magnitude", (0.5, 0.25, 0.125))
    d = sweep_alpha_to_zero(spec).column("c1_distance")
    assert d[1] / d[0] == pytest.approx(0.5, abs=0.02)
    assert d[2] / d[1] == pytest.approx(0.5, abs=0.02)


def test_alpha_to_zero_needs_descending_values():
    with pytest.raises(ExperimentError):
        sweep_alpha_to_zero(SweepSpec(BASE, "alpha_magnitude", (0.1, 0.2)))


def test_alpha_to_infinity_rejects_p1():
    with pytest.raises(ExperimentError, match="p > 1"):
        sweep_alpha_to_infinity(SweepSpec(BASE.replace(p=1.0), "alpha_magnitude", (1.0, 2.0)))


def test_alpha_to_infinity_single_value():
    res = sweep_alpha_to_infinity(SweepSpec(BASE, "alpha_magnitude", (1.0,)))
    assert len(res.rows) == 1
    assert res.verdicts["decreasing"] is None and res.verdicts["decay"] is None
    assert res.verdicts["bound"]


def test_alpha_to_infinity_decays():
    res = sweep_alpha_to_infinity(SweepSpec(BASE, "alpha_magnitude", (1.0, 4.0, 16.0, 64.0)))
    assert res.passed
    assert all(r[2] <= r[3] for r in res.rows)


def test_alpha_scan_p1():
    scan = estimate_alpha_nonexistence_p1(BASE.replace(p=1.0), (2.0, 8.0, 40.0))
    # lambda1[L_alpha] = lambda1 + alpha^2/4 passes 2 lambda1 near |alpha| = 6.3
    assert [r[1] for r in scan.rows] == [False, True, True]
    assert scan.first_collapse == 8.0
    assert scan.analytic_bound == pytest.approx(2 * L1 * 2.0)
    assert scan.rows[-1][4] and scan.consistent


def test_alpha_scan_rejects_p2():
    with pytest.raises(ExperimentError):
        estimate_alpha_nonexistence_p1(BASE, (1.0,))


def test_sweep_p_preconditions():
    g = build_grid(Domain.interval(), N)
    mu = principal_eigenvalue_advection(g, BASE.flow)
    mid = BASE.replace(lam=0.5 * (L1 + mu))
    with pytest.raises(ExperimentError, match="p values must be > 1"):
        sweep_p_to_one(SweepSpec(mid, "p", (1.5, 1.0)))
    with pytest.raises(ExperimentError, match="lambda1"):
        sweep_p_to_one(SweepSpec(BASE.replace(lam=2 * mu), "p", (1.5, 1.25)))


def test_sweep_p_converges_to_zero_limit():
    g = build_grid(Domain.interval(), N)
    mu = principal_eigenvalue_advection(g, BASE.flow)
    res = sweep_p_to_one(SweepSpec(BASE.replace(lam=0.5 * (L1 + mu)), "p", (1.5, 1.25, 1.125, 1.0625)))
    assert res.passed
    # lambda < lambda1[L_alpha]: the p = 1 problem has only the zero solution
    assert res.extra["limit_sup"] == 0.0


def test_divfree_rejects_shear():
    g = build_grid(Domain.rectangle(), 15)
    shear = FieldFlow((g.evaluate(lambda x, y: x), g.zeros()))
    params = ProblemParams(lam=30.0, flow=shear, domain=Domain.rectangle(), n=15)
    with pytest.raises(NonSolenoidalFlow) as info:
        divergence_free_case(params)
    assert info.value.max_divergence == pytest.approx(1.0)


def test_divfree_zero_c_matches_plain_solve():
    g = build_grid(Domain.rectangle(), 15)
    lam = principal_eigenpair(g).lambda1 + 1
    rot = divergence_free_case(ProblemParams(lam=lam, flow=rotational_flow(g, 0.0),
                                             domain=Domain.rectangle(), n=15))
    spec = SweepSpec(ProblemParams(lam=lam, flow=ConstantFlow((1.0, 0.0)),
                                   domain=Domain.rectangle(), n=15),
                     "alpha_magnitude", (1.0,))
    base = sweep_alpha_to_zero(spec).reports[0]
    assert rot.passed
    assert np.max(np.abs(rot.report.solution.values - base.solution.values)) <= 1e-8


def test_branch_rejects_start_below_lambda1():
    with pytest.raises(ExperimentError):
        trace_branch(BASE, [L1 - 0.1, L1 + 1])


def test_branch_origin_matches_threshold():
    base = ProblemParams(lam=L1, p=2.0, n=N)
    branch = trace_branch(base, [L1 + 0.1 * k for k in range(1, 6)])
    thr = threshold_bisect(base, 0.5 * L1, 2 * L1)
    assert branch.passed
    assert abs(branch.origin_estimate() - thr.lambda_star) <= thr.width


def test_branch_points_satisfy_solver_invariants():
    res = trace_branch(BASE, [L1 + 0.2, L1 + 0.5, L1 + 1.0])
    for pt in res.points:
        assert pt.positive and pt.in_bracket and pt.residual <= 1e-8


def test_sweep_determinism_and_warm_start_independence():
    spec = SweepSpec(BASE, "alpha_magnitude", (1.0, 0.5, 0.25))
    a = sweep_alpha_to_zero(spec)
    b = sweep_alpha_to_zero(spec)
    cold = sweep_alpha_to_zero(SweepSpec(BASE, "alpha_magnitude", (1.0, 0.5, 0.25), warm_start=False))
    assert a.rows == b.rows
    assert np.allclose(a.column("c1_distance"), cold.column("c1_distance"), atol=1e-6, rtol=0)
