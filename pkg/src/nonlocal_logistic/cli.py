"""Command-line entry point.

    nonlocal-logistic SUBCOMMAND [-c CONFIG] [--set section.key=value ...]

Outputs go to ``$NONLOCAL_LOGISTIC_OUT/<run.output>/<experiment>/`` (root
defaults to ``./out``).  Exit status: 0 all verdicts pass, 1 a verdict failed,
2 usage or configuration error, 3 numerical nonconvergence.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import checks
from .artifacts import RunDir, append_timing, sha256_text
from .config import ConfigError, RunConfig, parse_config
from .eigen import EigenNonConvergence, principal_eigenpair, principal_eigenvalue_advection
from .experiments import (
    ExperimentError,
    SweepSpec,
    divergence_free_case,
    estimate_alpha_nonexistence_p1,
    sweep_alpha_to_infinity,
    sweep_alpha_to_zero,
    sweep_p_to_one,
    threshold_bisect,
    trace_branch,
)
from .grid import Domain, Field, GridMismatchError, build_grid, read_field_csv
from .operators import (
    BallKernel,
    ConstantFlow,
    ConstantKernel,
    FieldFlow,
    GaussianKernel,
    KernelError,
    ProblemParams,
    TableKernel,
    assemble_kernel,
    rotational_flow,
)
from .plot import Axes, Series, spans_decades
from .solver import SolverOptions, solve_positive, supersolution_level, verify_solution

ENV_OUT = "NONLOCAL_LOGISTIC_OUT"
SUBCOMMANDS = ("eig", "solve", "verify", "threshold", "sweep-alpha0", "sweep-alphainf",
               "sweep-p", "divfree", "branch", "all")

EXIT_OK, EXIT_VERDICT, EXIT_USAGE, EXIT_NONCONVERGENCE = 0, 1, 2, 3


class UsageError(ValueError):
    pass


@dataclass
class Outcome:
    name: str
    verdicts: dict
    converged: bool = True
    lines: list[str] = field(default_factory=list)
    forced_code: int | None = None

    @property
    def code(self) -> int:
        if self.forced_code is not None:
            return self.forced_code
        if not self.converged:
            return EXIT_NONCONVERGENCE
        if any(v is False for v in self.verdicts.values()):
            return EXIT_VERDICT
        return EXIT_OK


# ---------------------------------------------------------------------------
# config -> problem

def _domain(cfg: RunConfig, force_2d: bool = False) -> Domain:
    d = cfg["domain"]
    if d["kind"] == "rectangle" or force_2d:
        return Domain.rectangle(d["x0"], d["x1"], d["y0"], d["y1"])
    return Domain.interval(d["x0"], d["x1"])


def _load_flow(path: str, grid) -> FieldFlow:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape != (grid.size, 2 * grid.dim):
        raise UsageError(f"{path}: expected {grid.size} rows of coordinates + {grid.dim} components")
    if not np.allclose(data[:, : grid.dim], grid.nodes, atol=1e-12 * max(grid.domain.lengths)):
        raise GridMismatchError(f"{path}: node coordinates do not match the grid")
    return FieldFlow(tuple(Field(grid, data[:, grid.dim + k]) for k in range(grid.dim)))


def _flow(cfg: RunConfig, grid):
    f = cfg["flow"]
    if f["kind"] == "rotational":
        return rotational_flow(grid, f["c"])
    if f["kind"] == "file":
        return _load_flow(f["file"], grid)
    alpha = f["alpha"]
    if len(alpha) != grid.dim:
        alpha = (alpha + (0.0,) * grid.dim)[: grid.dim]
    return ConstantFlow(alpha)


def _kernel(cfg: RunConfig, grid):
    k = cfg["kernel"]
    kind = k["kind"]
    if kind == "constant":
        return ConstantKernel(k["c"])
    if kind == "gaussian":
        return GaussianKernel(k["amplitude"], k["width"])
    if kind == "ball":
        return BallKernel(k["r"], k["b"])
    return TableKernel(np.loadtxt(k["file"], delimiter=",", ndmin=2))


def input_files(cfg: RunConfig) -> list[str]:
    files = []
    if cfg["flow"]["kind"] == "file":
        files.append(cfg["flow"]["file"])
    if cfg["kernel"]["kind"] == "table":
        files.append(cfg["kernel"]["file"])
    if cfg["run"]["solution"]:
        files.append(cfg["run"]["solution"])
    return files


def inputs_hash(cfg: RunConfig) -> str:
    parts: list = [cfg.serialize()]
    for path in input_files(cfg):
        parts.append(Path(path).read_bytes())
    return sha256_text(*parts)


def build_params(cfg: RunConfig, lam_expr=None, *, force_2d=False, n=None, p=None,
                 flow=None) -> tuple[ProblemParams, dict]:
    """Problem from the config plus resolved discrete constants."""
    domain = _domain(cfg, force_2d)
    n = cfg["problem"]["n"] if n is None else n
    grid = build_grid(domain, n)
    flow = _flow(cfg, grid) if flow is None else flow
    if callable(flow):
        flow = flow(grid)
    kernel = _kernel(cfg, grid)
    lam1 = principal_eigenpair(grid).lambda1
    lam1_adv = principal_eigenvalue_advection(grid, flow)
    expr = cfg["problem"]["lambda"] if lam_expr is None else lam_expr
    lam = expr.resolve(lam1, lam1_adv)
    params = ProblemParams(
        lam=lam,
        gamma=cfg["problem"]["gamma"],
        p=cfg["problem"]["p"] if p is None else p,
        flow=flow,
        kernel=kernel,
        domain=domain,
        n=n,
    )
    W = assemble_kernel(kernel, grid)
    resolved = {"lambda": lam, "lambda1": lam1, "lambda1_adv": lam1_adv, "k0": W.k0,
                "kinf": W.kinf, "n": n, "h": grid.h}
    try:
        resolved["M"] = supersolution_level(lam, params.gamma, W.k0)
    except ValueError:
        resolved["M"] = None
    return params, resolved


def solver_options(cfg: RunConfig) -> SolverOptions:
    return SolverOptions(tol=cfg["run"]["residual_tol"], scheme=cfg["run"]["scheme"])


def _bracket_info(rep) -> dict:
    if rep.bracket is None:
        return {"epsilon": None, "a": None}
    return {"epsilon": rep.bracket.epsilon, "a": rep.bracket.a}


def _axis_scale(values) -> str:
    return "log" if spans_decades(values) else "linear"


# ---------------------------------------------------------------------------
# subcommands

class Context:
    def __init__(self, cfg: RunConfig, root: Path):
        self.cfg = cfg
        self.root = root
        self.base = root / cfg["run"]["output"]
        self.sha = inputs_hash(cfg)
        self.options = solver_options(cfg)

    def dir(self, name: str) -> RunDir:
        return RunDir(self.base / name)

    def finish(self, rd: RunDir, name: str, resolved: dict, outcome: Outcome, extra=None):
        rd.manifest(command=name, config=self.cfg, resolved=resolved,
                    verdicts=outcome.verdicts, inputs_sha256=self.sha, extra=extra)
        return outcome


def cmd_eig(ctx: Context) -> Outcome:
    params, resolved = build_params(ctx.cfg)
    eig = principal_eigenpair(params.grid)
    rd = ctx.dir("eig")
    rd.field("phi1.csv", eig.phi1)
    resolved.update(iterations=eig.iterations, eigen_residual=eig.residual)
    out = Outcome("eig", {"eigenvector_positive": bool(np.min(eig.phi1.interior()) > 0)})
    out.lines += [f"lambda1 = {eig.lambda1:.10g}",
                  f"lambda1[L_alpha] = {resolved['lambda1_adv']:.10g}"]
    return ctx.finish(rd, "eig", resolved, out)


def cmd_solve(ctx: Context) -> Outcome:
    params, resolved = build_params(ctx.cfg)
    rep = solve_positive(params, options=ctx.options)
    rd = ctx.dir("solve")
    rd.field("solution.csv", rep.solution)
    resolved.update(_bracket_info(rep))
    above = params.lam > resolved["lambda1"]
    verdicts = {
        "converged": rep.converged,
        "residual": rep.residual_inf <= ctx.options.tol,
        "apriori_bound": rep.apriori_bound_ok,
        "in_bracket": rep.in_bracket() if rep.bracket is not None else None,
        "positive": rep.is_positive if above else None,
    }
    out = Outcome("solve", verdicts, rep.converged)
    out.lines += [f"status: {rep.status}", f"sup|u| = {rep.sup_norm:.10g}",
                  f"residual = {rep.residual_inf:.3g}"]
    extra = {"status": rep.status, "scheme": rep.scheme, "iterations": rep.iterations,
             "sup_norm": rep.sup_norm, "residual_inf": rep.residual_inf,
             "min_interior": rep.positivity, "notes": list(rep.notes)}
    return ctx.finish(rd, "solve", resolved, out, extra)


def cmd_verify(ctx: Context) -> Outcome:
    path = ctx.cfg["run"]["solution"]
    if not path:
        raise UsageError("verify needs run.solution = <solution CSV>")
    params, resolved = build_params(ctx.cfg)
    u = read_field_csv(path, params.grid)
    v = verify_solution(u, params, tol=ctx.options.tol)
    rd = ctx.dir("verify")
    verdicts = {"is_solution": v.is_solution, "boundary": v.boundary_ok,
                "apriori_bound": v.apriori_ok}
    out = Outcome("verify", verdicts)
    out.lines += [f"residual = {v.residual_inf:.3g}", f"min interior = {v.min_interior:.6g}"]
    return ctx.finish(rd, "verify", resolved, out, {"verdict": vars(v)})


def cmd_threshold(ctx: Context) -> Outcome:
    cfg = ctx.cfg
    params, resolved = build_params(cfg)
    lam1, adv = resolved["lambda1"], resolved["lambda1_adv"]
    th = cfg["threshold"]
    res = threshold_bisect(params, th["lo"].resolve(lam1, adv), th["hi"].resolve(lam1, adv),
                           starts=cfg["run"]["starts"], seed=cfg["run"]["seed"],
                           width_factor=th["width"], options=ctx.options)
    rd = ctx.dir("threshold")
    rows = [(k, lam, found) for k, (lam, found) in enumerate(res.history)]
    rd.table("bisection.csv", ("step", "lambda", "positive_found"), rows)
    rd.plot("bisection.svg",
            [Series.from_xy("tested lambda", [r[0] for r in rows], [r[1] for r in rows]),
             Series.from_xy("lambda1(h)", [r[0] for r in rows], [lam1] * len(rows))],
            Axes("bisection step", "lambda", title="existence threshold"))
    resolved.update(lambda_star=res.lambda_star, width=res.width)
    out = Outcome("threshold", {"threshold_near_lambda1": res.relative_gap <= th["rel_tol"]})
    out.lines.append(f"lambda* = {res.lambda_star:.6g}, lambda1 = {lam1:.6g}, "
                     f"relative gap {res.relative_gap:.3g}")
    return ctx.finish(rd, "threshold", resolved, out)


def cmd_sweep_alpha0(ctx: Context) -> Outcome:
    sec = ctx.cfg["sweep-alpha0"]
    rd = ctx.dir("sweep-alpha0")
    verdicts, converged, series, resolved = {}, True, [], {}
    for p in sec["p"]:
        params, resolved = build_params(ctx.cfg, sec["lambda"], p=p)
        spec = SweepSpec(params, "alpha_magnitude", sec["values"], ctx.cfg["run"]["seed"])
        res = sweep_alpha_to_zero(spec, sec["decay"], ctx.options)
        tag = f"p{p:g}"
        rd.table(f"sweep_{tag}.csv", res.columns, res.rows)
        for k, v in res.verdicts.items():
            verdicts[f"{tag}.{k}"] = v
        converged &= res.complete
        ok = [r for r in res.rows if r[2] > 0]
        if ok:
            series.append(Series.from_xy(f"C1 distance, p={p:g}", [r[0] for r in ok],
                                         [r[2] for r in ok]))
    if series:
        xs = [x for s in series for x, _ in s.points]
        ys = [y for s in series for _, y in s.points]
        rd.plot("sweep.svg", series, Axes("|alpha|", "C1 distance to alpha = 0",
                                          _axis_scale(xs), _axis_scale(ys), "|alpha| -> 0"))
    out = Outcome("sweep-alpha0", verdicts, converged)
    return ctx.finish(rd, "sweep-alpha0", resolved, out)


def cmd_sweep_alphainf(ctx: Context) -> Outcome:
    sec = ctx.cfg["sweep-alphainf"]
    params, resolved = build_params(ctx.cfg, sec["lambda"], p=sec["p"])
    spec = SweepSpec(params, "alpha_magnitude", sec["values"], ctx.cfg["run"]["seed"])
    res = sweep_alpha_to_infinity(spec, sec["decay"], ctx.options)
    rd = ctx.dir("sweep-alphainf")
    rd.table("sweep.csv", res.columns, res.rows)
    a = res.column("alpha")
    rd.plot("sup_norm.svg", [Series.from_xy("sup|u|", a, res.column("sup_norm"))],
            Axes("alpha", "sup|u|", _axis_scale(a), _axis_scale(res.column("sup_norm")),
                 "|alpha| -> infinity"))
    rd.plot("bound.svg",
            [Series.from_xy("int u^p", a, res.column("int_u_p")),
             Series.from_xy("analytic bound", a, res.column("bound"))],
            Axes("alpha", "value", _axis_scale(a), "log", "integral against the test-function bound"))
    resolved.update(res.extra)
    out = Outcome("sweep-alphainf", dict(res.verdicts), res.verdicts["converged"])
    return ctx.finish(rd, "sweep-alphainf", resolved, out)


def cmd_alpha_scan(ctx: Context) -> Outcome:
    sec = ctx.cfg["alpha-scan"]
    params, resolved = build_params(ctx.cfg, sec["lambda"], p=1.0)
    scan = estimate_alpha_nonexistence_p1(params, sec["values"], ctx.cfg["run"]["starts"],
                                          ctx.cfg["run"]["seed"], ctx.options)
    rd = ctx.dir("alpha-scan")
    rd.table("scan.csv", scan.columns, scan.rows)
    a = [r[0] for r in scan.rows]
    sups = [max(r[2], 1e-16) for r in scan.rows]
    rd.plot("scan.svg", [Series.from_xy("max final sup|u|", a, sups)],
            Axes("|alpha|", "max final sup|u|", _axis_scale(a), "log", "p = 1 collapse scan"))
    resolved.update(first_collapse=scan.first_collapse, analytic_bound=scan.analytic_bound)
    out = Outcome("alpha-scan", {"consistent": scan.consistent})
    out.lines.append(f"first collapse at |alpha| = {scan.first_collapse}, "
                     f"analytic bound {scan.analytic_bound:.6g}")
    return ctx.finish(rd, "alpha-scan", resolved, out)


def cmd_sweep_p(ctx: Context) -> Outcome:
    sec = ctx.cfg["sweep-p"]
    grid = build_grid(_domain(ctx.cfg), ctx.cfg["problem"]["n"])
    flow = _flow(ctx.cfg, grid)
    if not isinstance(flow, ConstantFlow):
        raise UsageError("sweep-p needs a constant flow")
    params, resolved = build_params(ctx.cfg, sec["lambda"], flow=flow.scaled(sec["alpha"]))
    spec = SweepSpec(params, "p", sec["values"], ctx.cfg["run"]["seed"])
    res = sweep_p_to_one(spec, sec["decay"], ctx.options)
    rd = ctx.dir("sweep-p")
    rd.table("sweep.csv", res.columns, res.rows)
    ps, d = res.column("p"), res.column("c1_distance")
    rd.plot("sweep.svg", [Series.from_xy("C1 distance to p = 1", ps, d)],
            Axes("p", "C1 distance", "linear", _axis_scale(d), "p -> 1+"))
    resolved.update(res.extra)
    out = Outcome("sweep-p", dict(res.verdicts), res.complete)
    return ctx.finish(rd, "sweep-p", resolved, out)


def _rotational(c):
    return lambda grid: rotational_flow(grid, c)


def cmd_divfree(ctx: Context) -> Outcome:
    sec = ctx.cfg["divfree"]
    params, resolved = build_params(ctx.cfg, sec["lambda"], force_2d=True, n=sec["n"],
                                    p=sec["p"], flow=_rotational(sec["c"]))
    res = divergence_free_case(params, options=ctx.options)
    rep = res.report
    rd = ctx.dir("divfree")
    rd.field("solution.csv", rep.solution)
    grid = params.grid
    n_full = grid.shape[0]
    mid = rep.solution.values.reshape(grid.shape)[:, n_full // 2]
    rd.plot("midline.svg", [Series.from_xy("u(x, y_mid)", grid.axes[0], mid)],
            Axes("x", "u", title="divergence-free flow: midline profile"))
    resolved.update(_bracket_info(rep), max_divergence=res.max_divergence)
    verdicts = {"converged": rep.converged, "positive": rep.is_positive,
                "residual": rep.residual_inf <= 1e-8}
    out = Outcome("divfree", verdicts, rep.converged)
    out.lines.append(f"min interior {rep.positivity:.6g}, residual {rep.residual_inf:.3g}")
    extra = {"sup_norm": rep.sup_norm, "min_interior": rep.positivity,
             "residual_inf": rep.residual_inf, "status": rep.status}
    return ctx.finish(rd, "divfree", resolved, out, extra)


def cmd_branch(ctx: Context) -> Outcome:
    sec = ctx.cfg["branch"]
    params, resolved = build_params(ctx.cfg, None, force_2d=True, n=sec["n"], p=sec["p"],
                                    flow=_rotational(sec["c"]))
    lams = [resolved["lambda1"] + d for d in sec["offsets"]]
    res = trace_branch(params, lams, options=ctx.options)
    rd = ctx.dir("branch")
    rd.table("branch.csv", res.columns, res.rows)
    if res.points:
        lam = [p.lam for p in res.points]
        rd.plot("branch.svg",
                [Series.from_xy("sup|u|", lam, [p.solution_norm_sup for p in res.points]),
                 Series.from_xy("C1 norm", lam, [p.solution_norm_c1 for p in res.points])],
                Axes("lambda", "norm", title="branch of positive solutions"))
    resolved.update(apriori_bound=res.apriori_bound, lambda_values=lams)
    out = Outcome("branch", dict(res.verdicts), res.verdicts["complete"])
    if res.message:
        out.lines.append(res.message)
    return ctx.finish(rd, "branch", resolved, out)


def _check_outcome(ctx: Context, name: str, result, resolved=None) -> Outcome:
    rd = ctx.dir(name)
    if result.columns:
        rd.table(f"{name}.csv", result.columns, result.rows)
    out = Outcome(name, {name: result.passed})
    return ctx.finish(rd, name, dict(resolved or {}), out, {"details": result.details})


def cmd_nonexistence(ctx: Context) -> Outcome:
    sec = ctx.cfg["nonexistence"]
    params, resolved = build_params(ctx.cfg, sec["lambda"])
    res = checks.nonexistence_check(params, sec["starts"], ctx.cfg["run"]["seed"], ctx.options)
    return _check_outcome(ctx, "nonexistence", res, resolved)


# criterion number -> (label, runner)
def _acceptance_plan():
    return [
        (1, "eigenvalue oracles", lambda ctx: _check_outcome(ctx, "eigen-oracles", checks.eigen_oracles())),
        (2, "phi-operator laws",
         lambda ctx: _check_outcome(ctx, "phi-laws", checks.phi_laws(seed=ctx.cfg["run"]["seed"]))),
        (3, "discrete boundary identity", lambda ctx: _check_outcome(ctx, "eqi", checks.eqi_check())),
        (4, "existence threshold", cmd_threshold),
        (5, "bracket", lambda ctx: _check_outcome(ctx, "bracket", checks.bracket_check(options=ctx.options))),
        (6, "nonexistence below lambda1", cmd_nonexistence),
        (7, "decay as |alpha| grows", cmd_sweep_alphainf),
        (8, "C1 limit as |alpha| -> 0", cmd_sweep_alpha0),
        (9, "limit as p -> 1+", cmd_sweep_p),
        (10, "divergence-free flow", cmd_divfree),
        (11, "bifurcation branch", cmd_branch),
        (12, "collocation oracle", lambda ctx: _check_outcome(ctx, "oracle", checks.oracle_check())),
        (None, "p = 1 alpha scan", cmd_alpha_scan),
        (None, "eigenpair", cmd_eig),
    ]


def cmd_all(ctx: Context) -> Outcome:
    rows, verdicts, converged = [], {}, True
    codes = []
    out = Outcome("all", verdicts)
    for number, label, runner in _acceptance_plan():
        t0 = time.perf_counter()
        sub = runner(ctx)
        append_timing(ctx.base, sub.name, time.perf_counter() - t0)
        codes.append(sub.code)
        passed = sub.code == EXIT_OK
        key = f"{number:02d} {label}" if number else label
        verdicts[key] = passed
        converged &= sub.converged
        rows.append((number if number else "", label, sub.name, "pass" if passed else "fail"))
        out.lines.append(f"[{'PASS' if passed else 'FAIL'}] {key}")
        out.lines += [f"    {line}" for line in sub.lines]
        failed = [k for k, v in sub.verdicts.items() if v is False]
        if failed:
            out.lines.append(f"    failing verdicts: {', '.join(failed)}")
    rd = ctx.dir("summary")
    rd.table("acceptance.csv", ("criterion", "label", "experiment", "result"), rows)
    ctx.finish(rd, "all", {}, out)
    out.converged = converged
    out.forced_code = next((c for c in codes if c != EXIT_OK), EXIT_OK)
    return out


COMMANDS = {
    "eig": cmd_eig,
    "solve": cmd_solve,
    "verify": cmd_verify,
    "threshold": cmd_threshold,
    "sweep-alpha0": cmd_sweep_alpha0,
    "sweep-alphainf": cmd_sweep_alphainf,
    "sweep-p": cmd_sweep_p,
    "divfree": cmd_divfree,
    "branch": cmd_branch,
    "all": cmd_all,
}


def run(subcommand: str, cfg: RunConfig, root=None) -> tuple[int, Outcome]:
    """Run one subcommand; returns (exit status, outcome)."""
    if subcommand not in COMMANDS:
        raise UsageError(f"unknown subcommand {subcommand!r}")
    root = Path(root if root is not None else os.environ.get(ENV_OUT, "out"))
    ctx = Context(cfg, root)
    t0 = time.perf_counter()
    outcome = COMMANDS[subcommand](ctx)
    if subcommand != "all":
        append_timing(ctx.base, subcommand, time.perf_counter() - t0)
    return outcome.code, outcome


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="nonlocal-logistic",
        description="Nonlocal logistic equation with nonlinear advection: solves and experiments.",
        epilog=f"Output root: ${ENV_OUT} (default ./out). "
               "Exit: 0 pass, 1 verdict failure, 2 usage error, 3 nonconvergence.",
    )
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("-c", "--config", help="INI-style config file")
    ap.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                    help="override one config key (repeatable)")
    return ap


def main(argv=None) -> int:
    ap = _parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    text = ""
    if args.config:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            print(f"error: cannot read config: {exc}", file=sys.stderr)
            return EXIT_USAGE
    try:
        cfg = parse_config(text, args.set)
    except ConfigError as exc:
        where = args.config or "<defaults>"
        for err in exc.errors:
            print(f"{where}: {err}", file=sys.stderr)
        return EXIT_USAGE
    try:
        code, outcome = run(args.subcommand, cfg)
    except EigenNonConvergence as exc:
        print(f"nonconvergence: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except (UsageError, ExperimentError, KernelError, GridMismatchError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    for line in outcome.lines:
        print(line)
    for k, v in outcome.verdicts.items():
        if args.subcommand != "all":
            print(f"{k}: {'n/a' if v is None else ('pass' if v else 'FAIL')}")
    return code


if __name__ == "__main__":
    sys.exit(main())
