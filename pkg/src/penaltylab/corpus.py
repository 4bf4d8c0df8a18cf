"""Built-in problem corpus and the self-verification runner.

Every packaged problem file declares its own expected outcomes
(``expect.<command>.<block>.<field>`` lines).  The runner executes each
block, compares fields against the declared comparators and emits one
report row per comparison.

Comparator syntax for expected values::

    CertifiedExactOnDomain      exact string match
    true / false                booleans
    0 +- 1e-6                   absolute tolerance
    0.4 .. 0.6                  inclusive range
    >= 50,  <= 1.1              one-sided bounds
    1.0                         plain number (compared at 1e-9)
"""

from __future__ import annotations

import fnmatch
import math
import time
from importlib import resources

from .certify import (certify_exactness, estimate_cstar, fit_envelope,
                      gap_field, probe_distance_conditions,
                      probe_sequence_types, residual_field,
                      scan_value_function)
from .penalty import default_residual_spec, parse_penalty_spec
from .problem import loads_problem
from .report import RunReport, inputs_digest
from .solver import Budget, minimize_feasible
from .variational import PathFamily, k_infinity_probe, mfcq_check, nu_estimate

__all__ = ["corpus_names", "corpus_text", "load_corpus_problem", "run_corpus",
           "check_expected"]


def corpus_names():
    root = resources.files("penaltylab") / "corpus"
    return sorted(p.name[:-len(".problem")] for p in root.iterdir()
                  if p.name.endswith(".problem"))


def corpus_text(name):
    root = resources.files("penaltylab") / "corpus"
    return (root / f"{name}.problem").read_text(encoding="utf-8")


def load_corpus_problem(name):
    return loads_problem(corpus_text(name), name_hint=name)


def check_expected(expected, actual):
    """True when ``actual`` satisfies the declared comparator string."""
    text = expected.strip()
    low = text.lower()
    if low in ("true", "false"):
        return bool(actual) == (low == "true")
    if ".." in text:
        a, b = (float(p) for p in text.split(".."))
        return isinstance(actual, (int, float)) and a <= actual <= b
    if "+-" in text:
        mid, tol = (float(p) for p in text.split("+-"))
        return isinstance(actual, (int, float)) and abs(actual - mid) <= tol
    if text.startswith(">="):
        return isinstance(actual, (int, float)) and actual >= float(text[2:])
    if text.startswith("<="):
        return isinstance(actual, (int, float)) and actual <= float(text[2:])
    try:
        want = float(text)
    except ValueError:
        return str(actual) == text
    return isinstance(actual, (int, float)) and abs(actual - want) <= 1e-9


def _parse_at(text, n):
    vals = [float(p) for p in text.split()]
    if len(vals) != n:
        raise ValueError(f"'at' needs {n} coordinates, got {len(vals)}")
    return vals


def _fstar_of(loaded, budget, seed, cache):
    key = loaded.problem.name
    if key not in cache:
        r = minimize_feasible(loaded.problem, budget, seed)
        if not r.ok:
            raise RuntimeError(f"corpus problem {key} has no feasible point")
        cache[key] = r.best_value
    return cache[key]


def _run_block(loaded, command, block, budget, seed, fstar_cache):
    """Execute one expectation block; returns {field: actual} for comparison."""
    problem = loaded.problem
    rspec = default_residual_spec(problem)
    out = {}
    if command == "certify":
        pspec = parse_penalty_spec(block["penalty"])
        cert = certify_exactness(problem, pspec, rspec, budget, seed)
        out = {"penalty": block["penalty"], "status": cert.status,
               "fstar": cert.fstar, "penalized_inf": cert.penalized_inf,
               "witness_ratio": cert.witness_ratio,
               "cstar": cert.cstar_estimate, "transfer": cert.argmin_transfer}
    elif command == "cstar":
        pspec = parse_penalty_spec(block.get("penalty", "plain(1)"))
        fstar = _fstar_of(loaded, budget, seed, fstar_cache)
        est = estimate_cstar(problem, rspec, fstar, budget, seed, pspec=pspec)
        out = {"penalty": block.get("penalty", "plain(1)"),
               "status": est.status, "value": est.value}
    elif command == "envelope":
        fstar = _fstar_of(loaded, budget, seed, fstar_cache)
        fit = fit_envelope(gap_field(problem, fstar), residual_field(problem, rspec),
                           budget=budget, seed=seed, domain=problem.domain)
        out = {"alpha_hat": fit.alpha_hat, "beta_hat": fit.beta_hat,
               "single_exponent_feasible": fit.single_exponent_feasible,
               "validate_chat": fit.validate_chat,
               "residual_zero": fit.residual_zero,
               "residual_inf": fit.residual_inf}
    elif command == "calmness":
        light = Budget(starts=min(budget.starts, 8), iters=min(budget.iters, 220),
                       samples=budget.samples)
        scan = scan_value_function(problem, budget=light, seed=seed)
        out = {"diverging": scan.diverging, "modulus": scan.modulus_estimate,
               "v0": scan.v0}
        if "at_norm" in block:
            want_norm = float(block["at_norm"])
            best = None
            for u, v in zip(scan.u_grid, scan.values):
                nrm = math.sqrt(sum(c * c for c in u))
                if v is None or abs(nrm - want_norm) > 1e-12 * max(1.0, want_norm):
                    continue
                ratio = (scan.v0 - v) / nrm
                best = ratio if best is None else max(best, ratio)
            out["ratio"] = best if best is not None else math.nan
            out["at_norm"] = want_norm
    elif command == "sequences":
        fstar = _fstar_of(loaded, budget, seed, fstar_cache)
        verdict = probe_sequence_types(gap_field(problem, fstar),
                                       residual_field(problem, rspec),
                                       problem.domain, budget, seed)
        out = {"first_type": verdict.first_found,
               "second_type": verdict.second_found,
               "epsilon": verdict.epsilon_used, "bound": verdict.bound_used}
    elif command == "distcond":
        rep = probe_distance_conditions(problem, rspec, budget, seed)
        out = {"status": rep.status, "c1_holds": rep.c1_holds_on_domain,
               "c2_variant_holds": rep.c2_variant_holds,
               "sample_size": rep.sample_size}
    elif command == "mfcq":
        at = _parse_at(block["at"], problem.n)
        rep = mfcq_check(problem, at, seed=seed)
        out = {"at": block["at"], "holds": rep.holds, "min_norm": rep.min_norm}
    elif command == "nu":
        at = _parse_at(block["at"], problem.n)
        probe = nu_estimate(problem, at, seed=seed)
        out = {"at": block["at"], "nu_hat": probe.nu_hat, "lambda": probe.lam}
    elif command == "kinf":
        families = tuple(PathFamily(c) for c in loaded.kinf_paths)
        rep = k_infinity_probe(problem, families, budget, seed,
                               fstar=_fstar_of(loaded, budget, seed, fstar_cache))
        out = {"verdict": rep.c2_verdict, "witness_t": rep.witness_t,
               "fstar": rep.fstar, "clusters": len(rep.cluster_values)}
    else:
        raise ValueError(f"unknown corpus command {command!r}")
    return out


_SKIP_FIELDS = {"penalty", "at", "at_norm"}  # inputs, not expectations


def run_corpus(pattern="", budget=Budget(), seed=None, names=None):
    """Run every expectation of every matching corpus entry.

    Returns ``(report, all_ok)``.  An empty match is an empty report and
    counts as success.
    """
    if names is None:
        names = corpus_names()
    if pattern:
        names = [n for n in names if fnmatch.fnmatch(n, pattern)]
    report = RunReport("corpus")
    report.digest = inputs_digest(pattern, budget.__dict__, seed, names)
    all_ok = True
    for name in sorted(names):
        loaded = load_corpus_problem(name)
        run_seed = loaded.seed if seed is None else seed
        fstar_cache = {}
        for command in sorted(loaded.expectations):
            blocks = loaded.expectations[command]
            for idx in sorted(blocks):
                block = blocks[idx]
                t0 = time.perf_counter()
                actual = _run_block(loaded, command, block, budget, run_seed,
                                    fstar_cache)
                wall = int(1000 * (time.perf_counter() - t0))
                for fieldname in sorted(block):
                    if fieldname in _SKIP_FIELDS:
                        continue
                    expected = block[fieldname]
                    got = actual.get(fieldname)
                    ok = check_expected(expected, got)
                    all_ok = all_ok and ok
                    report.add(problem=name, command=command, block=idx,
                               field=fieldname, expected=expected,
                               actual=got, ok=ok, wall_ms=wall)
    return report, all_ok
