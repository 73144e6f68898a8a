"""Positive solutions: explicit sub/supersolution bracket, pseudo-transient march, Newton.

The existence argument behind the bracket is non-constructive, so the constructive
route is to march ``u_t = -F(u)`` from the subsolution until the residual is small
relative to the solution, then polish with damped Newton and re-check the bracket.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .eigen import EigenPair, principal_eigenpair
from .grid import Field, sup_norm
from .operators import (
    ConstantFlow,
    Discretization,
    KernelMatrix,
    ProblemParams,
    cell_peclet,
    signed_power,
)

__all__ = [
    "Bracket",
    "CertificationFailure",
    "NoSubsolution",
    "NoSupersolution",
    "NonexistenceVerdict",
    "ProblemParams",
    "SolveReport",
    "SolverOptions",
    "build_subsolution",
    "build_supersolution",
    "detect_nonexistence",
    "solve_positive",
    "verify_solution",
]

log = logging.getLogger(__name__)

EPS_FLOOR = 1e-12


class NoSubsolution(ValueError):
    pass


class NoSupersolution(ValueError):
    pass


class CertificationFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-8
    march_max: int = 20_000
    plateau_window: int = 500
    newton_switch: float = 1e-3
    newton_max: int = 50
    tau_max: float = 1e4
    # march collapse: sup(u) below this fraction of the start is snapped to zero
    zero_snap: float = 1e-9
    # below this fraction of the start a decaying march may hand over to Newton
    decay_gate: float = 1e-3
    scheme: str = "auto"


@dataclass(frozen=True, eq=False)
class Bracket:
    sub: Field
    sup: Field
    epsilon: float
    a: float
    M: float


@dataclass(frozen=True, eq=False)
class SolveReport:
    solution: Field
    converged: bool
    residual_inf: float
    iterations: dict
    bracket: Bracket | None
    positivity: float
    apriori_bound_ok: bool
    M: float | None
    scheme: str = "central"
    status: str = ""
    notes: tuple = ()

    @property
    def is_positive(self) -> bool:
        return self.positivity > 0

    @property
    def sup_norm(self) -> float:
        return sup_norm(self.solution)

    def in_bracket(self, slack: float = 1e-8) -> bool:
        if self.bracket is None:
            return False
        u = self.solution.values
        return bool(
            np.all(self.bracket.sub.values - slack <= u)
            and np.all(u <= self.bracket.sup.values + slack)
        )


# ---------------------------------------------------------------------------
# bracket

def supersolution_level(lam: float, gamma: float, k0: float) -> float:
    if k0 <= 0:
        raise NoSupersolution("kernel row mass k0 is zero: no constant supersolution")
    if lam <= 0:
        raise NoSupersolution(f"constant supersolution needs lambda > 0, got {lam}")
    return (lam / k0) ** (1.0 / gamma)


def build_supersolution(params: ProblemParams, W: KernelMatrix) -> tuple[Field, float]:
    M = supersolution_level(params.lam, params.gamma, W.k0)
    grid = params.grid
    # -Delta M = 0 and alpha.grad(M^p) = 0, so only the reaction sign matters
    reaction = M * (params.lam - W.row_mass * M**params.gamma)
    if np.max(reaction) > 1e-10 * max(1.0, params.lam * M):
        raise CertificationFailure(
            f"constant M={M:g} fails the supersolution inequality by {np.max(reaction):g}"
        )
    return Field(grid, np.full(grid.size, M)), M


def subsolution_exponent(lam: float, lambda1: float) -> float:
    return 0.5 * (1.0 + lam / lambda1)


def build_subsolution(params: ProblemParams, eig: EigenPair,
                      disc: Discretization | None = None, scheme: str = "central",
                      cap: float | None = None) -> tuple[Field, float, float]:
    """epsilon * phi1^a with a the midpoint of (1, lambda/lambda1); epsilon halved from 1.

    ``cap`` bounds epsilon from above (the supersolution level, so sub <= sup).
    """
    lam1 = eig.lambda1
    if not params.lam > lam1:
        raise NoSubsolution(
            f"lambda={params.lam:g} <= lambda1={lam1:g}: no admissible exponent a"
        )
    if disc is None:
        disc = Discretization.build(params)
    a = subsolution_exponent(params.lam, lam1)
    base = eig.phi1.interior() ** a
    eps = 1.0
    while cap is not None and eps > cap:
        eps /= 2
    while eps >= EPS_FLOOR:
        F = disc.residual_vec(eps * base, params.lam, params.gamma, params.p, scheme)
        if np.max(F) <= 0.0:
            return disc.to_field(eps * base), eps, a
        eps /= 2
    raise CertificationFailure(
        f"no epsilon >= {EPS_FLOOR:g} makes eps*phi1^{a:.4g} a subsolution"
    )


def build_bracket(params: ProblemParams, eig: EigenPair, disc: Discretization,
                  scheme: str = "central") -> tuple[Bracket | None, list[str]]:
    notes = []
    try:
        sup, M = build_supersolution(params, disc.kernel)
    except (NoSupersolution, CertificationFailure) as exc:
        return None, [f"supersolution: {exc}"]
    try:
        sub, eps, a = build_subsolution(params, eig, disc, scheme, cap=M)
    except (NoSubsolution, CertificationFailure) as exc:
        return None, [f"subsolution: {exc}"]
    return Bracket(sub, sup, eps, a, M), notes


# ---------------------------------------------------------------------------
# march + Newton

@dataclass
class _Run:
    v: np.ndarray
    converged: bool = False
    residual: float = np.inf
    march: int = 0
    newton: int = 0
    status: str = ""
    trace: list = field(default_factory=list)


class _Problem:
    def __init__(self, disc: Discretization, params: ProblemParams, scheme: str):
        self.disc = disc
        self.lam, self.gamma, self.p = params.lam, params.gamma, params.p
        self.scheme = scheme
        self.adv = disc.advection(scheme) if disc.has_flow else None
        self.A = disc.laplacian
        self.I = sp.identity(self.A.shape[0], format="csr")

    def F(self, v):
        return self.disc.residual_vec(v, self.lam, self.gamma, self.p, self.scheme)

    def J(self, v):
        return self.disc.jacobian(v, self.lam, self.gamma, self.p, self.scheme)

    def scale(self, v):
        return max(float(np.max(np.abs(self.A @ v))), abs(self.lam) * float(np.max(np.abs(v))), 1e-300)

    def march_step(self, v, tau):
        """(I + tau(-Delta_h + adv diag|v|^{p-1} + diag phi_v)) v_new = (1 + tau lambda) v.

        Growth is explicit and crowding implicit with lagged coefficients, so the
        amplitude map tends to lambda A / (lambda1 + c A) for large tau: monotone
        and contracting instead of overshooting into a two-cycle.
        """
        M = self.A + sp.diags(self.disc.W_inner @ np.abs(v) ** self.gamma)
        if self.adv is not None:
            M = M + self.adv @ sp.diags(np.abs(v) ** (self.p - 1))
        rhs = (1.0 + tau * self.lam) * v
        out = spla.spsolve((self.I + tau * M).tocsc(), rhs)
        return np.maximum(out, 0.0)


def _newton(prob: _Problem, v: np.ndarray, opts: SolverOptions):
    v = v.copy()
    for k in range(opts.newton_max):
        F = prob.F(v)
        r = float(np.max(np.abs(F)))
        if r <= opts.tol:
            return v, True, k, r
        try:
            d = np.linalg.solve(prob.J(v), -F)
        except np.linalg.LinAlgError:
            return v, False, k, r
        n2 = float(np.linalg.norm(F))
        t = 1.0
        while t >= 1.0 / 1024:
            trial = v + t * d
            if np.linalg.norm(prob.F(trial)) <= (1 - 1e-4 * t) * n2:
                break
            t /= 2
        else:
            return v, False, k, r
        v = trial
    r = float(np.max(np.abs(prob.F(v))))
    return v, r <= opts.tol, opts.newton_max, r


def _march_newton(prob: _Problem, v0: np.ndarray, opts: SolverOptions) -> _Run:
    h = prob.disc.grid.h
    run = _Run(v=np.maximum(v0, 0.0))
    v = run.v
    sup0 = float(np.max(v))
    if sup0 == 0.0:
        run.v, run.converged, run.residual, run.status = v, True, 0.0, "zero start"
        return run
    tau = 0.5 * h**2 / (1.0 + sup0)
    tau_min = 1e-6 * tau
    F = prob.F(v)
    r = float(np.max(np.abs(F)))
    rel = r / prob.scale(v)
    switch = opts.newton_switch
    best_abs, best_rel, last_progress = r, rel, 0
    prev_sup = sup0
    decaying = 0
    while True:
        sup = float(np.max(v))
        if sup <= opts.zero_snap * sup0:
            run.v = np.zeros_like(v)
            run.converged, run.residual, run.status = True, 0.0, "collapsed to zero"
            return run
        if r <= opts.tol:
            run.v, run.converged, run.residual, run.status = v, True, r, "march converged"
            return run
        near = rel <= switch
        deep = sup <= opts.decay_gate * sup0 and decaying >= 10
        if near or deep:
            vn, ok, its, rn = _newton(prob, v, opts)
            run.newton += its
            collapsed = float(np.max(np.abs(vn))) < 0.1 * sup
            if ok and not collapsed:
                run.v, run.converged, run.residual, run.status = vn, True, rn, "newton"
                return run
            if ok and deep and float(np.max(np.abs(vn))) <= opts.zero_snap * sup0:
                run.v = np.zeros_like(v)
                run.converged, run.residual, run.status = True, 0.0, "collapsed to zero"
                return run
            if near:
                switch /= 10
            decaying = -50  # wait before the next deep-gate attempt
        if run.march >= opts.march_max:
            run.v, run.residual, run.status = v, r, "march step cap"
            return run
        if run.march - last_progress > opts.plateau_window:
            run.v, run.residual, run.status = v, r, "march stagnation"
            return run
        v_new = prob.march_step(v, tau)
        run.march += 1
        F = prob.F(v_new)
        r_new = float(np.max(np.abs(F)))
        rel_new = r_new / prob.scale(v_new) if np.any(v_new) else 0.0
        # relative residual may wobble a few percent while the start relaxes
        if rel_new <= 1.05 * rel:
            tau = min(2 * tau, opts.tau_max)
        elif rel_new > 1.5 * rel:
            tau = max(tau / 2, tau_min)
        v, r, rel = v_new, r_new, rel_new
        sup_new = float(np.max(v))
        decaying = decaying + 1 if sup_new < prev_sup else min(decaying, 0)
        prev_sup = sup_new
        if r < 0.99 * best_abs or rel < 0.99 * best_rel:
            best_abs, best_rel = min(best_abs, r), min(best_rel, rel)
            last_progress = run.march


def _start_field(params, eig, bracket, initial) -> np.ndarray:
    grid = params.grid
    if initial is not None:
        vals = initial.values if isinstance(initial, Field) else np.asarray(initial, float)
        return np.maximum(vals[grid.interior_mask], 0.0)
    if bracket is not None:
        return bracket.sub.interior().copy()
    return 0.5 * eig.phi1.interior()


def solve_positive(params: ProblemParams, *, initial: Field | None = None,
                   options: SolverOptions | None = None,
                   disc: Discretization | None = None,
                   eig: EigenPair | None = None) -> SolveReport:
    opts = options or SolverOptions()
    if disc is None:
        disc = Discretization.build(params)
    grid = disc.grid
    if eig is None:
        eig = principal_eigenpair(grid)

    bracket, notes = build_bracket(params, eig, disc)
    try:
        M = supersolution_level(params.lam, params.gamma, disc.kernel.k0)
    except NoSupersolution:
        M = None
    v0 = _start_field(params, eig, bracket, initial)

    scheme = "central" if opts.scheme == "auto" else opts.scheme
    run = _march_newton(_Problem(disc, params, scheme), v0, opts)
    if opts.scheme == "auto":
        pe = cell_peclet(grid, params.flow, params.p, float(np.max(np.abs(run.v))))
        if pe > 1.0:
            notes.append(f"cell Peclet {pe:.3g} > 1: upwind re-solve")
            scheme = "upwind"
            if bracket is not None:
                bracket, more = build_bracket(params, eig, disc, scheme)
                notes += more
            run = _march_newton(_Problem(disc, params, scheme), run.v, opts)

    u = disc.to_field(run.v)
    res = float(np.max(np.abs(_Problem(disc, params, scheme).F(run.v)))) if run.v.size else 0.0
    converged = bool(run.converged and res <= opts.tol)
    positivity = float(np.min(run.v))
    apriori = True if M is None else bool(sup_norm(u) <= M + 1e-6)
    log.debug("solve lam=%g p=%g: %s, residual %.3g", params.lam, params.p, run.status, res)
    return SolveReport(
        solution=u,
        converged=converged,
        residual_inf=res,
        iterations={"march": run.march, "newton": run.newton},
        bracket=bracket,
        positivity=positivity,
        apriori_bound_ok=apriori,
        M=M,
        scheme=scheme,
        status=run.status,
        notes=tuple(notes),
    )


# ---------------------------------------------------------------------------
# verification and nonexistence

@dataclass(frozen=True)
class VerifyVerdict:
    residual_inf: float
    residual_max: float
    residual_min: float
    min_interior: float
    sup_norm: float
    M: float | None
    apriori_ok: bool
    boundary_ok: bool
    positive: bool
    is_solution: bool


def verify_solution(u: Field, params: ProblemParams, tol: float = 1e-8,
                    disc: Discretization | None = None,
                    scheme: str = "central") -> VerifyVerdict:
    if disc is None:
        disc = Discretization.build(params)
    grid = u.grid
    boundary_ok = bool(np.all(u.values[grid.boundary_mask] == 0.0))
    v = u.values[grid.interior_mask]
    F = disc.residual_vec(v, params.lam, params.gamma, params.p, scheme)
    try:
        M = supersolution_level(params.lam, params.gamma, disc.kernel.k0)
    except NoSupersolution:
        M = None
    s = sup_norm(u)
    res = float(np.max(np.abs(F)))
    return VerifyVerdict(
        residual_inf=res,
        residual_max=float(np.max(F)),
        residual_min=float(np.min(F)),
        min_interior=float(np.min(v)),
        sup_norm=s,
        M=M,
        apriori_ok=True if M is None else bool(s <= M + 1e-6),
        boundary_ok=boundary_ok,
        positive=bool(np.min(v) > 0),
        is_solution=bool(res <= tol and boundary_ok),
    )


@dataclass(frozen=True, eq=False)
class NonexistenceVerdict:
    no_positive: bool
    sup_norms: tuple[float, ...]
    reports: tuple[SolveReport, ...]
    alpha_bounds: tuple[dict, ...]

    @property
    def bound_violated(self) -> bool:
        return any(b["violated"] for b in self.alpha_bounds)


def advection_bounds_p1(params: ProblemParams) -> tuple[dict, ...]:
    """Necessary condition |alpha_i| <= lambda * sup|R_i -+ x_i| for p = 1, constant flows.

    The shift R_i puts the test function R_i - x_i in [1, width_i + 1], so the
    bound is ``lambda * (width_i + 1)`` in either flow direction.
    """
    if not isinstance(params.flow, ConstantFlow):
        return ()
    out = []
    for axis, (a, (lo, hi)) in enumerate(zip(params.flow.components, params.domain.bounds)):
        sup_test = (hi + 1.0) - lo
        bound = params.lam * sup_test
        out.append({"axis": axis, "alpha": a, "bound": bound,
                    "violated": bool(abs(a) > bound)})
    return tuple(out)


def nonexistence_starts(params: ProblemParams, eig: EigenPair, starts: int,
                        seed: int, level: float) -> list[np.ndarray]:
    grid = params.grid
    inner = grid.interior_mask
    phi1 = eig.phi1.interior()
    fields = [level * phi1, np.full(phi1.size, level / 2)]
    rng = np.random.default_rng(seed)
    scaled = [
        (grid.nodes[inner, k] - lo) / (hi - lo) for k, (lo, hi) in enumerate(grid.domain.bounds)
    ]
    while len(fields) < starts:
        bump = np.zeros(phi1.size)
        for xk in scaled:
            coeffs = rng.uniform(-1.0, 1.0, size=4)
            for m, c in enumerate(coeffs, start=1):
                bump += c / m * np.cos(m * np.pi * xk)
        fields.append(level / 2 * phi1 * np.exp(bump))
    return fields


def detect_nonexistence(params: ProblemParams, starts: int = 3, seed: int = 0,
                        options: SolverOptions | None = None,
                        disc: Discretization | None = None,
                        collapse_tol: float = 1e-6) -> NonexistenceVerdict:
    if starts < 3:
        raise ValueError("need at least 3 starts")
    if disc is None:
        disc = Discretization.build(params)
    eig = principal_eigenpair(disc.grid)
    try:
        level = supersolution_level(params.lam, params.gamma, disc.kernel.k0)
    except NoSupersolution:
        level = 1.0
    reports = []
    for v0 in nonexistence_starts(params, eig, starts, seed, level):
        reports.append(
            solve_positive(params, initial=disc.to_field(v0), options=options,
                           disc=disc, eig=eig)
        )
    norms = tuple(r.sup_norm for r in reports)
    return NonexistenceVerdict(
        no_positive=all(s < collapse_tol for s in norms),
        sup_norms=norms,
        reports=tuple(reports),
        alpha_bounds=advection_bounds_p1(params),
    )
