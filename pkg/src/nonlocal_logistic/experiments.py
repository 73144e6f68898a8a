"""Parameter sweeps, threshold searches and branch traces with pass/fail verdicts.

Every limit statement is checked on a finite sequence; decay factors are
acceptance thresholds, not derived constants, and can be overridden.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .eigen import principal_eigenpair, principal_eigenvalue_advection
from .grid import Field, c1_distance, c1_norm, integrate, sup_distance, sup_norm
from .operators import ConstantFlow, Discretization, FieldFlow, ProblemParams
from .solver import (
    NoSupersolution,
    SolveReport,
    SolverOptions,
    detect_nonexistence,
    solve_positive,
    supersolution_level,
)

VARIABLES = ("lambda", "alpha_magnitude", "p")


class ExperimentError(ValueError):
    pass


class InconsistentVerdicts(ExperimentError):
    pass


class NonSolenoidalFlow(ExperimentError):
    def __init__(self, max_divergence: float):
        super().__init__(f"flow is not divergence free: max |div| = {max_divergence:.3g}")
        self.max_divergence = max_divergence


@dataclass(frozen=True, eq=False)
class SweepSpec:
    base: ProblemParams
    vary: str
    values: tuple[float, ...]
    seed: int = 0
    warm_start: bool = True

    def __post_init__(self):
        if self.vary not in VARIABLES:
            raise ExperimentError(f"vary must be one of {VARIABLES}, got {self.vary!r}")
        vals = tuple(float(v) for v in self.values)
        if not vals:
            raise ExperimentError("sweep needs at least one value")
        d = np.diff(vals)
        if d.size and not (np.all(d > 0) or np.all(d < 0)):
            raise ExperimentError("sweep values must be strictly monotone")
        object.__setattr__(self, "values", vals)


@dataclass(frozen=True, eq=False)
class SweepResult:
    name: str
    columns: tuple[str, ...]
    rows: tuple[tuple, ...]
    verdicts: dict
    reports: tuple = ()
    complete: bool = True
    message: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.complete and all(v for v in self.verdicts.values() if v is not None)

    def column(self, name: str) -> list:
        k = self.columns.index(name)
        return [row[k] for row in self.rows]


@dataclass(frozen=True)
class BranchPoint:
    lam: float
    solution_norm_sup: float
    solution_norm_c1: float
    positive: bool
    residual: float = 0.0
    in_bracket: bool | None = None


def params_at(base: ProblemParams, vary: str, value: float) -> ProblemParams:
    if vary == "lambda":
        return base.replace(lam=value)
    if vary == "p":
        return base.replace(p=value)
    if vary == "alpha_magnitude":
        if not isinstance(base.flow, ConstantFlow):
            raise ExperimentError("alpha magnitude sweeps need a constant flow")
        return base.replace(flow=base.flow.scaled(value))
    raise ExperimentError(f"unknown sweep variable {vary!r}")


def strictly_decreasing(xs) -> bool:
    return all(b < a for a, b in zip(xs, xs[1:]))


def strictly_increasing(xs) -> bool:
    return all(b > a for a, b in zip(xs, xs[1:]))


def _run_sequence(spec: SweepSpec, disc: Discretization, options, first_start=None):
    """Solve along ``spec.values``; stops at the first nonconverged solve."""
    reports = []
    prev = first_start
    eig = principal_eigenpair(disc.grid)
    for value in spec.values:
        params = params_at(spec.base, spec.vary, value)
        local = disc if params.flow is spec.base.flow else disc.with_flow(params.flow)
        start = prev if spec.warm_start else None
        rep = solve_positive(params, initial=start, options=options, disc=local, eig=eig)
        reports.append(rep)
        if not rep.converged:
            break
        prev = rep.solution
    return reports


# ---------------------------------------------------------------------------
# existence threshold

@dataclass(frozen=True)
class ThresholdResult:
    lambda_star: float
    lambda1: float
    width: float
    history: tuple[tuple[float, bool], ...]

    @property
    def relative_gap(self) -> float:
        return abs(self.lambda_star - self.lambda1) / self.lambda1


def threshold_bisect(base: ProblemParams, lo: float, hi: float, starts: int = 3,
                     seed: int = 0, width_factor: float = 1e-2,
                     options: SolverOptions | None = None) -> ThresholdResult:
    """Bisect on "some start keeps a positive solution" down to ``width_factor * lambda1``."""
    if not lo < hi:
        raise ExperimentError(f"need lo < hi, got [{lo}, {hi}]")
    disc = Discretization.build(base)
    lam1 = principal_eigenpair(disc.grid).lambda1
    history = []

    def exists(lam):
        verdict = detect_nonexistence(base.replace(lam=lam), starts, seed, options, disc)
        history.append((lam, not verdict.no_positive))
        return not verdict.no_positive

    if exists(lo):
        raise InconsistentVerdicts(f"positive solution already at lower end {lo:g}")
    if not exists(hi):
        raise InconsistentVerdicts(f"no positive solution at upper end {hi:g}")
    target = width_factor * lam1
    while hi - lo > target:
        mid = 0.5 * (lo + hi)
        if exists(mid):
            hi = mid
        else:
            lo = mid
    return ThresholdResult(0.5 * (lo + hi), lam1, hi - lo, tuple(history))


# ---------------------------------------------------------------------------
# |alpha| -> 0

def sweep_alpha_to_zero(spec: SweepSpec, decay_factor: float = 0.1,
                        options: SolverOptions | None = None) -> SweepResult:
    if spec.vary != "alpha_magnitude":
        raise ExperimentError("sweep_alpha_to_zero varies alpha_magnitude")
    disc = Discretization.build(spec.base)
    lam1 = principal_eigenpair(disc.grid).lambda1
    if not spec.base.lam > lam1:
        raise ExperimentError(f"need lambda > lambda1 = {lam1:g}")
    if len(spec.values) > 1 and spec.values[1] > spec.values[0]:
        raise ExperimentError("alpha magnitudes must be descending toward zero")
    ref_params = params_at(spec.base, "alpha_magnitude", 0.0)
    ref = solve_positive(ref_params, options=options, disc=disc.with_flow(ref_params.flow))
    if not ref.converged:
        return SweepResult("sweep-alpha0", _A0_COLS, (), {}, (ref,), False,
                           "alpha = 0 reference did not converge")
    reports = _run_sequence(spec, disc, options, first_start=ref.solution)
    # the alpha = 0 entry is the reference problem itself
    reports = [ref if v == 0.0 else r for v, r in zip(spec.values, reports)]
    rows = []
    for value, rep in zip(spec.values, reports):
        rows.append((value, sup_distance(rep.solution, ref.solution),
                     c1_distance(rep.solution, ref.solution), rep.converged))
    complete = len(reports) == len(spec.values) and reports[-1].converged
    dists = [r[2] for r in rows if r[3]]
    verdicts = {
        "converged": complete,
        "decreasing": strictly_decreasing(dists) if len(dists) > 1 else None,
        "decay": (dists[-1] <= decay_factor * dists[0]) if len(dists) > 1 else None,
        "positive": all(r.is_positive for r in reports),
    }
    return SweepResult("sweep-alpha0", _A0_COLS, tuple(rows), verdicts,
                       (ref, *reports), complete,
                       "" if complete else "sweep aborted at a nonconverged solve",
                       {"reference_sup": ref.sup_norm})


_A0_COLS = ("alpha", "sup_distance", "c1_distance", "converged")


# ---------------------------------------------------------------------------
# |alpha| -> infinity

def _test_function_sup(params: ProblemParams, axis: int) -> float:
    lo, hi = params.domain.bounds[axis]
    return (hi + 1.0) - lo


def sweep_alpha_to_infinity(spec: SweepSpec, decay_factor: float = 0.2,
                            options: SolverOptions | None = None) -> SweepResult:
    """sup|u| decay plus the rowwise bound alpha_i int u^p <= lambda sup|xi| M |Omega|."""
    if spec.vary != "alpha_magnitude":
        raise ExperimentError("sweep_alpha_to_infinity varies alpha_magnitude")
    if not spec.base.p > 1:
        raise ExperimentError("decay as |alpha| -> infinity needs p > 1")
    disc = Discretization.build(spec.base)
    lam1 = principal_eigenpair(disc.grid).lambda1
    base = spec.base
    if not base.lam > lam1:
        raise ExperimentError(f"need lambda > lambda1 = {lam1:g}")
    if len(spec.values) > 1 and spec.values[1] < spec.values[0]:
        raise ExperimentError("alpha magnitudes must be ascending")
    M = supersolution_level(base.lam, base.gamma, disc.kernel.k0)
    direction = np.array(params_at(base, "alpha_magnitude", 1.0).flow.components)
    axis = int(np.argmax(np.abs(direction)))
    xi_sup = _test_function_sup(base, axis)
    measure = base.domain.measure
    reports = []
    prev = None
    eig = principal_eigenpair(disc.grid)
    rows = []
    for value in spec.values:
        params = params_at(base, "alpha_magnitude", value)
        rep = solve_positive(params, initial=prev if spec.warm_start else None,
                             options=options, disc=disc.with_flow(params.flow), eig=eig)
        reports.append(rep)
        if rep.converged:
            prev = rep.solution
        a_i = abs(params.flow.components[axis])
        upow = Field(rep.solution.grid, np.abs(rep.solution.values) ** base.p)
        int_up = integrate(upow)
        bound = base.lam * xi_sup * M * measure / a_i
        rows.append((value, rep.sup_norm, int_up, bound, bool(int_up <= bound),
                     rep.converged, rep.scheme))
    sups = [r[1] for r in rows]
    verdicts = {
        "converged": all(r.converged for r in reports),
        "bound": all(r[4] for r in rows),
        "decreasing": strictly_decreasing(sups) if len(rows) > 1 else None,
        "decay": (sups[-1] <= decay_factor * sups[0]) if len(rows) > 1 else None,
    }
    cols = ("alpha", "sup_norm", "int_u_p", "bound", "bound_ok", "converged", "scheme")
    return SweepResult("sweep-alphainf", cols, tuple(rows), verdicts, tuple(reports),
                       True, "", {"M": M, "xi_sup": xi_sup})


# ---------------------------------------------------------------------------
# p = 1: large |alpha| kills positive solutions

@dataclass(frozen=True)
class AlphaScan:
    rows: tuple[tuple, ...]
    first_collapse: float | None
    analytic_bound: float
    consistent: bool

    columns = ("alpha", "collapsed", "max_sup_norm", "bound", "bound_violated")


def estimate_alpha_nonexistence_p1(base: ProblemParams, values, starts: int = 3,
                                   seed: int = 0,
                                   options: SolverOptions | None = None) -> AlphaScan:
    """First scanned |alpha| with no positive solution, against lambda * sup|R - x_i|.

    ``consistent`` means every magnitude beyond the analytic bound collapsed.
    """
    if base.p != 1:
        raise ExperimentError("the |alpha| nonexistence scan is for p = 1")
    if not isinstance(base.flow, ConstantFlow):
        raise ExperimentError("the |alpha| scan needs a constant flow direction")
    values = [float(v) for v in values]
    if not strictly_increasing(values):
        raise ExperimentError("scan values must be ascending")
    disc = Discretization.build(base)
    rows = []
    first = None
    bound = None
    for value in values:
        params = params_at(base, "alpha_magnitude", value)
        verdict = detect_nonexistence(params, starts, seed, options, disc.with_flow(params.flow))
        b = max(verdict.alpha_bounds, key=lambda d: abs(d["alpha"]))
        bound = b["bound"]
        rows.append((value, verdict.no_positive, max(verdict.sup_norms), bound, b["violated"]))
        if verdict.no_positive and first is None:
            first = value
    consistent = all(r[1] for r in rows if r[4])
    return AlphaScan(tuple(rows), first, bound, consistent)


# ---------------------------------------------------------------------------
# p -> 1+

def sweep_p_to_one(spec: SweepSpec, decay_factor: float = 0.1,
                   options: SolverOptions | None = None) -> SweepResult:
    if spec.vary != "p":
        raise ExperimentError("sweep_p_to_one varies p")
    if any(v <= 1.0 for v in spec.values):
        raise ExperimentError("p values must be > 1; the p = 1 limit is solved separately")
    if len(spec.values) > 1 and spec.values[1] > spec.values[0]:
        raise ExperimentError("p values must be descending toward 1")
    base = spec.base
    disc = Discretization.build(base)
    lam1 = principal_eigenpair(disc.grid).lambda1
    lam1_adv = principal_eigenvalue_advection(disc.grid, base.flow)
    if not lam1 < base.lam < lam1_adv:
        raise ExperimentError(
            f"lambda = {base.lam:g} must lie in (lambda1, lambda1[L_alpha]) = "
            f"({lam1:g}, {lam1_adv:g})"
        )
    reports = _run_sequence(spec, disc, options)
    complete = len(reports) == len(spec.values) and reports[-1].converged
    limit = solve_positive(base.replace(p=1.0),
                           initial=reports[-1].solution if spec.warm_start else None,
                           options=options, disc=disc)
    rows = []
    for value, rep in zip(spec.values, reports):
        rows.append((value, sup_distance(rep.solution, limit.solution),
                     c1_distance(rep.solution, limit.solution), rep.converged))
    dists = [r[2] for r in rows]
    verdicts = {
        "converged": complete and limit.converged,
        "decreasing": strictly_decreasing(dists) if len(dists) > 1 else None,
        "decay": (dists[-1] <= decay_factor * dists[0]) if len(dists) > 1 else None,
    }
    cols = ("p", "sup_distance", "c1_distance", "converged")
    return SweepResult("sweep-p", cols, tuple(rows), verdicts, (*reports, limit), complete,
                       "" if complete else "sweep aborted at a nonconverged solve",
                       {"lambda1": lam1, "lambda1_adv": lam1_adv,
                        "limit_sup": limit.sup_norm, "limit_c1": c1_norm(limit.solution)})


# ---------------------------------------------------------------------------
# divergence-free field flows

@dataclass(frozen=True, eq=False)
class DivFreeResult:
    report: SolveReport
    lambda1: float
    max_divergence: float

    @property
    def passed(self) -> bool:
        r = self.report
        return bool(r.converged and r.is_positive and r.residual_inf <= 1e-8)


def max_interior_divergence(flow: FieldFlow) -> float:
    div = flow.divergence()
    return float(np.max(np.abs(div.values[div.grid.interior_mask])))


def divergence_free_case(base: ProblemParams, tol: float = 1e-8,
                         options: SolverOptions | None = None) -> DivFreeResult:
    if not isinstance(base.flow, FieldFlow):
        raise ExperimentError("divergence_free_case expects a field flow")
    div = max_interior_divergence(base.flow)
    if div > tol:
        raise NonSolenoidalFlow(div)
    disc = Discretization.build(base)
    lam1 = principal_eigenpair(disc.grid).lambda1
    if not base.lam > lam1:
        raise ExperimentError(f"need lambda > lambda1 = {lam1:g}")
    rep = solve_positive(base, options=options, disc=disc)
    return DivFreeResult(rep, lam1, div)


# ---------------------------------------------------------------------------
# branch of positive solutions from (lambda1, 0)

@dataclass(frozen=True, eq=False)
class BranchResult:
    points: tuple[BranchPoint, ...]
    verdicts: dict
    lambda1: float
    apriori_bound: float
    reports: tuple = ()
    message: str = ""

    @property
    def passed(self) -> bool:
        return all(v for v in self.verdicts.values() if v is not None)

    @property
    def last_good(self) -> BranchPoint | None:
        good = [p for p in self.points if p.positive]
        return good[-1] if good else None

    columns = ("lambda", "sup_norm", "c1_norm", "positive", "residual", "in_bracket")

    @property
    def rows(self):
        return tuple(
            (p.lam, p.solution_norm_sup, p.solution_norm_c1, p.positive, p.residual,
             p.in_bracket)
            for p in self.points
        )

    def origin_estimate(self) -> float:
        """Linear extrapolation of sup|u| to zero from the first two points."""
        p0, p1 = self.points[0], self.points[1]
        slope = (p1.solution_norm_sup - p0.solution_norm_sup) / (p1.lam - p0.lam)
        return p0.lam - p0.solution_norm_sup / slope


def trace_branch(base: ProblemParams, lambda_values, warm_start: bool = True,
                 origin_fraction: float = 0.1,
                 options: SolverOptions | None = None) -> BranchResult:
    lams = [float(v) for v in lambda_values]
    if not strictly_increasing(lams):
        raise ExperimentError("branch lambda values must be strictly ascending")
    disc = Discretization.build(base)
    eig = principal_eigenpair(disc.grid)
    if not lams[0] > eig.lambda1:
        raise ExperimentError(
            f"first lambda {lams[0]:g} must exceed lambda1 = {eig.lambda1:g}"
        )
    try:
        big_m = supersolution_level(max(lams), base.gamma, disc.kernel.k0)
        first_m = supersolution_level(lams[0], base.gamma, disc.kernel.k0)
    except NoSupersolution:
        big_m = first_m = np.inf
    points, reports = [], []
    prev = None
    message = ""
    for lam in lams:
        params = base.replace(lam=lam)
        rep = solve_positive(params, initial=prev if warm_start else None,
                             options=options, disc=disc, eig=eig)
        reports.append(rep)
        if not rep.converged:
            message = f"branch lost at lambda = {lam:g}"
            break
        prev = rep.solution
        points.append(BranchPoint(
            lam=lam,
            solution_norm_sup=rep.sup_norm,
            solution_norm_c1=c1_norm(rep.solution),
            positive=rep.is_positive,
            residual=rep.residual_inf,
            in_bracket=rep.in_bracket() if rep.bracket is not None else None,
        ))
    sups = [p.solution_norm_sup for p in points]
    complete = len(points) == len(lams)
    verdicts = {
        "complete": complete,
        "from_zero": bool(points) and sups[0] < origin_fraction * first_m,
        "increasing": strictly_increasing(sups),
        "positive": all(p.positive for p in points),
        "bounded": all(s <= big_m + 1e-6 for s in sups),
        "consistent": all(p.in_bracket is not False and p.residual <= 1e-8
                          for p in points if p.positive),
    }
    return BranchResult(tuple(points), verdicts, eig.lambda1, big_m, tuple(reports), message)
