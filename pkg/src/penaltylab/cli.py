"""Command-line front end.

    penaltylab certify   --problem F --penalty plain(1.5)
    penaltylab cstar     --problem F [--penalty power(1,0.5)]
    penaltylab envelope  --problem F
    penaltylab calmness  --problem F
    penaltylab sequences --problem F
    penaltylab distcond  --problem F
    penaltylab nu        --problem F --at "1 0"
    penaltylab mfcq      --problem F --at "0 0"
    penaltylab kinf      --problem F
    penaltylab corpus    [--filter 'ex4*']
    penaltylab plotdata  --problem F --kind c-sweep|loglog-envelope|calmness ...

Exit codes: 0 success, 1 corpus expectation failure, 2 usage or input
errors.
"""

from __future__ import annotations

import argparse
import math
import sys
import time

from . import __version__
from .certify import (certify_exactness, estimate_cstar, fit_envelope,
                      gap_field, probe_distance_conditions,
                      probe_sequence_types, residual_field, scan_value_function,
                      InfeasibleProblemError)
from .corpus import run_corpus
from .expr import ParseError
from .penalty import default_residual_spec, parse_penalty_spec, format_penalty_spec
from .problem import ProblemFormatError, load_problem
from .report import RunReport, emit_plotdata, inputs_digest
from .solver import Budget, SearchDomain, minimize_feasible
from .variational import (InfeasiblePointError, PathFamily, k_infinity_probe,
                          mfcq_check, nu_estimate)


def _add_common(p, need_problem=True):
    if need_problem:
        p.add_argument("--problem", required=True, help="problem file")
    p.add_argument("--seed", type=int, default=None,
                   help="run seed (default: the problem file's seed)")
    p.add_argument("--starts", type=int, default=None, help="multistart count")
    p.add_argument("--iters", type=int, default=None, help="pattern sweeps per start")
    p.add_argument("--samples", type=int, default=None, help="bulk sample count")
    p.add_argument("--budget", type=int, default=None,
                   help="shorthand for --samples")
    p.add_argument("--escape-scale", type=float, default=None,
                   help="override the problem's escape range")
    p.add_argument("--tol", type=float, default=1e-6, help="value-gap tolerance")
    p.add_argument("--out", default=None, help="write the report to this path")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--stable", action="store_true",
                   help="zero wall-clock fields in the written report")


def _budget_from(args):
    b = Budget()
    samples = args.samples if args.samples is not None else args.budget
    return Budget(starts=args.starts or b.starts,
                  iters=args.iters or b.iters,
                  samples=samples or b.samples)


def _load(args):
    loaded = load_problem(args.problem)
    problem = loaded.problem
    if args.escape_scale is not None:
        dom = problem.domain
        problem = type(problem)(problem.name, problem.n, problem.objective,
                                problem.feasibility,
                                SearchDomain(dom.lo, dom.hi, args.escape_scale))
        loaded = type(loaded)(problem, loaded.seed, loaded.expectations,
                              loaded.kinf_paths, loaded.note)
    seed = args.seed if args.seed is not None else loaded.seed
    return loaded, problem, seed


def _parse_coords(text, n):
    parts = text.replace(",", " ").split()
    vals = [float(p) for p in parts]
    if len(vals) != n:
        raise ValueError(f"--at needs {n} coordinates, got {len(vals)}")
    return vals


def _finish(report, args):
    if args.out:
        report.write(args.out, fmt=args.format, stable=args.stable)
    return 0


def _fmt_pt(pt):
    if pt is None:
        return ""
    return "(" + ", ".join(f"{v:.6g}" for v in pt) + ")"


# ---------------------------------------------------------------------------
# subcommands

def _cmd_certify(args):
    loaded, problem, seed = _load(args)
    budget = _budget_from(args)
    pspec = parse_penalty_spec(args.penalty)
    t0 = time.perf_counter()
    cert = certify_exactness(problem, pspec, None, budget, seed, tol=args.tol)
    wall = int(1000 * (time.perf_counter() - t0))
    print(f"{problem.name}: {cert.status}")
    print(f"  form            {format_penalty_spec(pspec)}")
    print(f"  fstar           {cert.fstar!r}")
    print(f"  penalized_inf   {cert.penalized_inf!r}"
          + ("  (crossed the unbounded threshold)" if cert.penalized_unbounded else ""))
    print(f"  cstar_estimate  {'unbounded' if cert.cstar_unbounded else repr(cert.cstar_estimate)}")
    if cert.witness is not None:
        print(f"  witness         {_fmt_pt(cert.witness)}")
    if not math.isnan(cert.witness_ratio):
        print(f"  witness_ratio   {cert.witness_ratio!r}")
    if cert.argmin_transfer is not None:
        print(f"  argmin_transfer {cert.argmin_transfer}")
    for note in cert.notes:
        print(f"  note: {note}")
    report = RunReport("certify", inputs_digest(args.problem, args.penalty, seed))
    report.add(problem=problem.name, form=pspec.form, c=pspec.c,
               alpha=pspec.alpha if pspec.form != "plain" else "",
               beta=pspec.beta if pspec.form == "twopower" else "",
               fstar=cert.fstar, penalized_inf=cert.penalized_inf,
               status=cert.status, witness_coords=cert.witness, wall_ms=wall)
    return _finish(report, args)


def _cmd_cstar(args):
    loaded, problem, seed = _load(args)
    budget = _budget_from(args)
    pspec = parse_penalty_spec(args.penalty) if args.penalty else None
    t0 = time.perf_counter()
    fs = minimize_feasible(problem, budget, seed)
    if not fs.ok:
        raise InfeasibleProblemError(f"{problem.name}: no feasible point found")
    est = estimate_cstar(problem, default_residual_spec(problem), fs.best_value,
                         budget, seed, pspec=pspec)
    wall = int(1000 * (time.perf_counter() - t0))
    shown = "unbounded" if est.unbounded else repr(est.value)
    print(f"{problem.name}: cstar {est.status} ({shown}), fstar {fs.best_value!r}")
    if est.unbounded and est.path:
        print(f"  witness path tail: {_fmt_pt(est.path[-1])} (ratio beyond 1e6)")
    report = RunReport("cstar", inputs_digest(args.problem, args.penalty, seed))
    report.add(problem=problem.name,
               form=format_penalty_spec(pspec) if pspec else "plain(1)",
               status=est.status, value=est.value, witness_coords=est.witness,
               wall_ms=wall)
    return _finish(report, args)


def _cmd_envelope(args):
    loaded, problem, seed = _load(args)
    budget = _budget_from(args)
    t0 = time.perf_counter()
    fs = minimize_feasible(problem, budget, seed)
    if not fs.ok:
        raise InfeasibleProblemError(f"{problem.name}: no feasible point found")
    fit = fit_envelope(gap_field(problem, fs.best_value),
                       residual_field(problem, default_residual_spec(problem)),
                       budget=budget, seed=seed, domain=problem.domain)
    wall = int(1000 * (time.perf_counter() - t0))
    print(f"{problem.name}: alpha_hat {fit.alpha_hat:.4f}  beta_hat {fit.beta_hat:.4f}")
    print(f"  fit rms (small end) {fit.residual_zero:.3g}, (large end) {fit.residual_inf:.3g}")
    print(f"  single-exponent bound feasible on tested grid: {fit.single_exponent_feasible}")
    print(f"  validation constant {fit.validate_chat!r} on {fit.validate_samples} samples")
    if fit.dropped:
        print(f"  dropped levels: {fit.dropped}")
    for w in fit.warnings:
        print(f"  warning: {w}")
    report = RunReport("envelope", inputs_digest(args.problem, seed))
    report.add(problem=problem.name, alpha_hat=fit.alpha_hat, beta_hat=fit.beta_hat,
               residual_zero=fit.residual_zero, residual_inf=fit.residual_inf,
               single_exponent_feasible=fit.single_exponent_feasible,
               validate_chat=fit.validate_chat, warnings=fit.warnings, wall_ms=wall)
    return _finish(report, args)


def _cmd_calmness(args):
    loaded, problem, seed = _load(args)
    budget = _budget_from(args)
    t0 = time.perf_counter()
    scan = scan_value_function(problem, budget=budget, seed=seed)
    wall = int(1000 * (time.perf_counter() - t0))
    print(f"{problem.name}: V(0) {scan.v0!r}, modulus {scan.modulus_estimate!r}, "
          f"diverging {scan.diverging}")
    for u, v in zip(scan.u_grid, scan.values):
        nrm = math.sqrt(sum(c * c for c in u))
        tag = "infeasible" if v is None else repr(v)
        print(f"  u={u} |u|={nrm:.3g} V={tag}")
    report = RunReport("calmness", inputs_digest(args.problem, seed))
    report.add(problem=problem.name, v0=scan.v0, modulus=scan.modulus_estimate,
               diverging=scan.diverging, grid_size=len(scan.u_grid), wall_ms=wall)
    return _finish(report, args)


def _cmd_sequences(args):
    loaded, problem, seed = _load(args)
    budget = _budget_from(args)
    t0 = time.perf_counter()
    fs = minimize_feasible(problem, budget, seed)
    if not fs.ok:
        raise InfeasibleProblemError(f"{problem.name}: no feasible point found")
    verdict = probe_sequence_types(gap_field(problem, fs.best_value),
                                   residual_field(problem, default_residual_spec(problem)),
                                   problem.domain, budget, seed)
    wall = int(1000 * (time.perf_counter() - t0))
    print(f"{problem.name}: first-kind witness {verdict.first_found}, "
          f"second-kind witness {verdict.second_found} "
          f"(epsilon {verdict.epsilon_used:.3g}, bound {verdict.bound_used:.3g})")
    if verdict.first_found:
        print(f"  first-kind terminal: {_fmt_pt(verdict.first_type[-1])} "
              f"diagnostics {verdict.first_diagnostics[-1]}")
    if verdict.second_found:
        print(f"  second-kind terminal: {_fmt_pt(verdict.second_type[-1])} "
              f"diagnostics {verdict.second_diagnostics[-1]}")
    for w in verdict.warnings:
        print(f"  warning: {w}")
    report = RunReport("sequences", inputs_digest(args.problem, seed))
    report.add(problem=problem.name, first_type=verdict.first_found,
               second_type=verdict.second_found, epsilon=verdict.epsilon_used,
               bound=verdict.bound_used, warnings=verdict.warnings, wall_ms=wall)
    return _finish(report, args)


def _cmd_distcond(args):
    loaded, problem, seed = _load(args)
    budget = _budget_from(args)
    t0 = time.perf_counter()
    rep = probe_distance_conditions(problem, None, budget, seed)
    wall = int(1000 * (time.perf_counter() - t0))
    print(f"{problem.name}: status {rep.status}")
    print(f"  residual->distance coupling holds on domain: {rep.c1_holds_on_domain}")
    print(f"  distance->residual (unbounded variant) holds: {rep.c2_variant_holds}")
    print(f"  feasible sample size {rep.sample_size}, delta {rep.delta_used}")
    report = RunReport("distcond", inputs_digest(args.problem, seed))
    report.add(problem=problem.name, status=rep.status,
               c1_holds=rep.c1_holds_on_domain,
               c2_variant_holds=rep.c2_variant_holds,
               sample_size=rep.sample_size, wall_ms=wall)
    return _finish(report, args)


def _cmd_nu(args):
    loaded, problem, seed = _load(args)
    at = _parse_coords(args.at, problem.n)
    t0 = time.perf_counter()
    probe = nu_estimate(problem, at, seed=seed)
    wall = int(1000 * (time.perf_counter() - t0))
    print(f"{problem.name}: nu_hat {probe.nu_hat!r} at {_fmt_pt(at)}")
    if math.isfinite(probe.nu_hat):
        print(f"  lambda {probe.lam!r}, w {probe.w}, u {probe.u}, v {probe.v}")
    for note in probe.notes:
        print(f"  note: {note}")
    report = RunReport("nu", inputs_digest(args.problem, args.at, seed))
    report.add(problem=problem.name, at=tuple(at), nu_hat=probe.nu_hat,
               **{"lambda": probe.lam}, w=probe.w, wall_ms=wall)
    return _finish(report, args)


def _cmd_mfcq(args):
    loaded, problem, seed = _load(args)
    at = _parse_coords(args.at, problem.n)
    t0 = time.perf_counter()
    rep = mfcq_check(problem, at, threshold=args.threshold, seed=seed)
    wall = int(1000 * (time.perf_counter() - t0))
    print(f"{problem.name}: holds {rep.holds} (min_norm {rep.min_norm!r}, "
          f"threshold {rep.threshold})")
    for note in rep.notes:
        print(f"  note: {note}")
    report = RunReport("mfcq", inputs_digest(args.problem, args.at, seed))
    report.add(problem=problem.name, at=tuple(at), holds=rep.holds,
               min_norm=rep.min_norm, threshold=rep.threshold, wall_ms=wall)
    return _finish(report, args)


def _cmd_kinf(args):
    loaded, problem, seed = _load(args)
    budget = _budget_from(args)
    t0 = time.perf_counter()
    families = tuple(PathFamily(c) for c in loaded.kinf_paths)
    rep = k_infinity_probe(problem, families, budget, seed)
    wall = int(1000 * (time.perf_counter() - t0))
    print(f"{problem.name}: {rep.c2_verdict}"
          + (f" (t {rep.witness_t!r})" if rep.c2_verdict != "HoldsOnProbes" else ""))
    print(f"  fstar {rep.fstar!r}, probed families {len(families) or 'auto'}")
    for t, diag in rep.cluster_values:
        print(f"  cluster t {t!r}: |x| {diag['norm']:.3g}, |x|*nu {diag['norm_nu']:.3g}, "
              f"violation {diag['dist']:.3g}")
    for note in rep.notes:
        print(f"  note: {note}")
    report = RunReport("kinf", inputs_digest(args.problem, seed))
    report.add(problem=problem.name, verdict=rep.c2_verdict, witness_t=rep.witness_t,
               fstar=rep.fstar, clusters=len(rep.cluster_values), wall_ms=wall)
    return _finish(report, args)


def _cmd_corpus(args):
    budget = _budget_from(args)
    report, ok = run_corpus(args.filter, budget, args.seed)
    for r in report.rows:
        mark = "PASS" if r["ok"] else "FAIL"
        print(f"{mark} {r['problem']:10s} {r['command']:10s} #{r['block']} "
              f"{r['field']:20s} want {r['expected']!r:24s} got {r['actual']!r}")
    print(f"{sum(1 for r in report.rows if r['ok'])}/{len(report.rows)} expectations hold")
    if args.out:
        report.write(args.out, fmt=args.format, stable=args.stable)
    return 0 if ok else 1


def _cmd_plotdata(args):
    loaded, problem, seed = _load(args)
    budget = _budget_from(args)
    if args.kind == "c-sweep":
        if not args.penalty or not args.c_values:
            raise ValueError("c-sweep needs --penalty and --c-values")
        base = parse_penalty_spec(args.penalty)
        series = []
        for c in (float(v) for v in args.c_values.split(",")):
            pspec = type(base)(base.form, c, base.alpha, base.beta)
            cert = certify_exactness(problem, pspec, None, budget, seed, tol=args.tol)
            gap = max(0.0, cert.fstar - cert.penalized_inf)
            series.append((c, gap))
        emit_plotdata(series, args.out, header="c  gap(fstar - penalized_inf)")
    elif args.kind == "loglog-envelope":
        fs = minimize_feasible(problem, budget, seed)
        if not fs.ok:
            raise InfeasibleProblemError(f"{problem.name}: no feasible point found")
        fit = fit_envelope(gap_field(problem, fs.best_value),
                           residual_field(problem, default_residual_spec(problem)),
                           budget=budget, seed=seed, domain=problem.domain)
        series = [(math.log10(t), math.log10(max(m, 1e-300)))
                  for t, m in fit.samples]
        emit_plotdata(series, args.out, header="log10(level)  log10(envelope)")
    elif args.kind == "calmness":
        scan = scan_value_function(problem, budget=budget, seed=seed)
        series = []
        for u, v in zip(scan.u_grid, scan.values):
            if v is None:
                continue
            series.append((math.sqrt(sum(c * c for c in u)), v))
        emit_plotdata(series, args.out, header="|u|  V(u)")
    print(f"wrote {args.out}")
    return 0


def build_parser():
    ap = argparse.ArgumentParser(
        prog="penaltylab",
        description="construct and numerically certify exact penalty functions")
    ap.add_argument("--version", action="version", version=f"penaltylab {__version__}")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("certify", help="decide exactness of a penalty form")
    _add_common(p)
    p.add_argument("--penalty", required=True,
                   help="plain(c) | power(c,a) | twopower(c,a,b) | curvature(c,a)")
    p.set_defaults(fn=_cmd_certify)

    p = sub.add_parser("cstar", help="estimate the smallest workable weight")
    _add_common(p)
    p.add_argument("--penalty", default=None, help="form whose effective residual to use")
    p.set_defaults(fn=_cmd_cstar)

    p = sub.add_parser("envelope", help="fit growth exponents of the gap envelope")
    _add_common(p)
    p.set_defaults(fn=_cmd_envelope)

    p = sub.add_parser("calmness", help="scan the perturbed value function")
    _add_common(p)
    p.set_defaults(fn=_cmd_calmness)

    p = sub.add_parser("sequences", help="search for first/second-kind escape paths")
    _add_common(p)
    p.set_defaults(fn=_cmd_sequences)

    p = sub.add_parser("distcond", help="probe residual/distance couplings")
    _add_common(p)
    p.set_defaults(fn=_cmd_distcond)

    p = sub.add_parser("nu", help="mixing-norm estimate at a point")
    _add_common(p)
    p.add_argument("--at", required=True, help="coordinates, e.g. '1 0'")
    p.set_defaults(fn=_cmd_nu)

    p = sub.add_parser("mfcq", help="constraint qualification probe at a point")
    _add_common(p)
    p.add_argument("--at", required=True)
    p.add_argument("--threshold", type=float, default=1e-3)
    p.set_defaults(fn=_cmd_mfcq)

    p = sub.add_parser("kinf", help="asymptotic cluster values of the objective")
    _add_common(p)
    p.set_defaults(fn=_cmd_kinf)

    p = sub.add_parser("corpus", help="run the packaged corpus expectations")
    _add_common(p, need_problem=False)
    p.add_argument("--filter", default="", help="glob over corpus names")
    p.set_defaults(fn=_cmd_corpus)

    p = sub.add_parser("plotdata", help="emit two-column series for plotting")
    _add_common(p)
    p.add_argument("--kind", required=True,
                   choices=("c-sweep", "loglog-envelope", "calmness"))
    p.add_argument("--penalty", default=None)
    p.add_argument("--c-values", default=None, help="comma list for c-sweep")
    p.set_defaults(fn=_cmd_plotdata)
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except (ProblemFormatError, ParseError, ValueError,
            InfeasibleProblemError, InfeasiblePointError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
