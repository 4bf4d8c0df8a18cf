"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with ``pytest tests/test_acceptance.py -v -s``.  Budgets are the
defaults (plus a 1.2e5-sample budget where a larger sampling floor is
part of the criterion); everything completes on a laptop in well under
five minutes.
"""

import math

import numpy as np
import pytest

from penaltylab.certify import (STATUS_CERTIFIED, STATUS_COUNTEREXAMPLE,
                                STATUS_UNBOUNDED, certify_exactness,
                                estimate_cstar, fit_envelope, gap_field,
                                probe_sequence_types, residual_field,
                                scan_value_function)
from penaltylab.corpus import load_corpus_problem, run_corpus
from penaltylab.expr import fd_gradient, parse, to_text
from penaltylab.cones import ConeForm, project_to_cone
from penaltylab.penalty import (PenaltySpec, default_residual_spec,
                                parse_penalty_spec)
from penaltylab.solver import Budget, minimize_feasible
from penaltylab.variational import PathFamily, k_infinity_probe, mfcq_check

from oracles import poly_gradient, random_polynomial

BUDGET = Budget()                       # starts=16, iters=260, samples=100000
BIG = Budget(starts=16, iters=260, samples=120_000)
CALM = Budget(starts=8, iters=220, samples=1000)


def _report(num, ok, detail):
    print(f"\nACCEPTANCE {num}: {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, f"criterion {num}: {detail}"


@pytest.fixture(scope="module")
def problems():
    names = ["ex3resid", "ex4i", "ex4ii", "ex4iii", "ex4iv", "ex5final",
             "vd41", "vd42i", "vd42ii"]
    return {n: load_corpus_problem(n) for n in names}


@pytest.fixture(scope="module")
def calm_scans(problems):
    return {
        "ex4ii": scan_value_function(problems["ex4ii"].problem, budget=CALM, seed=7),
        "ex4iv": scan_value_function(problems["ex4iv"].problem, budget=CALM, seed=7),
    }


def test_criterion_1_affine_threshold(problems):
    p = problems["ex4iii"].problem
    hi = certify_exactness(p, PenaltySpec("plain", 1.5), budget=BUDGET, seed=7)
    lo = certify_exactness(p, PenaltySpec("plain", 0.5), budget=BUDGET, seed=7)
    est = estimate_cstar(p, default_residual_spec(p), hi.fstar, BUDGET, seed=7)
    ok = (hi.status == STATUS_CERTIFIED
          and abs(hi.penalized_inf - 0.0) <= 1e-6
          and lo.status == STATUS_COUNTEREXAMPLE
          and lo.witness_ratio > 0.99
          and est.status == "finite"
          and abs(est.value - 1.0) <= 1e-2)
    _report(1, ok, f"certify(1.5)={hi.status}, certify(0.5)={lo.status} "
            f"(witness ratio {lo.witness_ratio:.4f}), cstar={est.value:.4f}")


def test_criterion_2_exponential_gap_and_calmness(problems, calm_scans):
    p = problems["ex4ii"].problem
    certs = {c: certify_exactness(p, PenaltySpec("plain", float(c)),
                                  budget=BUDGET, seed=7) for c in (1, 10, 100)}
    scan = calm_scans["ex4ii"]
    ratio_at_1e3 = max((scan.v0 - v) / 1e-3
                       for u, v in zip(scan.u_grid, scan.values)
                       if v is not None
                       and abs(math.sqrt(sum(c * c for c in u)) - 1e-3) < 1e-15)
    ok = all(c.status == STATUS_COUNTEREXAMPLE and c.penalized_inf <= 0.1
             and abs(c.fstar - 1.0) <= 1e-6 for c in certs.values())
    ok = ok and scan.diverging and ratio_at_1e3 >= 50.0  # 100 within factor 2
    _report(2, ok, "penalized infima "
            + ", ".join(f"c={c}: {cert.penalized_inf:.2e}" for c, cert in certs.items())
            + f" all CounterexampleFound; calmness diverging={scan.diverging}, "
            f"slope at |u|=1e-3 is {ratio_at_1e3:.1f}")


def test_criterion_3_cubic_unbounded_and_degenerate_mfcq(problems):
    p = problems["ex4i"].problem
    certs = [certify_exactness(p, PenaltySpec("plain", float(c)),
                               budget=BUDGET, seed=7) for c in (1, 10, 100)]
    rep = mfcq_check(p, [0.0], seed=7)
    ok = all(c.status == STATUS_UNBOUNDED and c.penalized_inf <= -1e6
             for c in certs)
    ok = ok and rep.holds is False and rep.min_norm <= 1e-3
    _report(3, ok, f"three UnboundedPenalized certificates (values "
            f"{[f'{c.penalized_inf:.2e}' for c in certs]}), "
            f"qualification min_norm={rep.min_norm:.2e}")


def test_criterion_4_regularity_without_exactness(problems, calm_scans):
    p = problems["ex4iv"].problem
    certs = [certify_exactness(p, PenaltySpec("plain", float(c)),
                               budget=BUDGET, seed=7) for c in (1, 10, 100)]
    rep = mfcq_check(p, [0.0, 0.0], seed=7)
    kinf = k_infinity_probe(p, (), budget=BUDGET, seed=7)
    scan = calm_scans["ex4iv"]
    ok = (all(c.status == STATUS_UNBOUNDED for c in certs)
          and rep.holds is True and rep.min_norm >= 0.9
          and kinf.c2_verdict == "HoldsOnProbes"
          and scan.modulus_estimate <= 1.1)
    _report(4, ok, f"UnboundedPenalized at c=1,10,100 despite qualification "
            f"(min_norm {rep.min_norm:.3f}), {kinf.c2_verdict}, calmness "
            f"modulus {scan.modulus_estimate:.3f} <= 1.1")


def test_criterion_5_split_exponents(problems):
    loaded = problems["vd41"]
    p = loaded.problem
    fs = minimize_feasible(p, BUDGET, seed=13)
    phi = gap_field(p, fs.best_value)
    psi = residual_field(p, default_residual_spec(p))
    fit = fit_envelope(phi, psi, budget=BIG, seed=13, domain=p.domain)
    # fresh validation with the nominal half/one pair on 1e5 points, |x| <= 1e3
    rng = np.random.default_rng(991)
    d = rng.standard_normal((100_000, 2))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    X = d * (1e3 * rng.random((100_000, 1)) ** 0.5)
    pv = phi.fn_many(X)
    sv = psi.fn_many(X)
    mask = sv > 1e-8
    chat = float(np.max(pv[mask] / (sv[mask] ** 0.5 + sv[mask])))
    holds = bool(np.all(chat * (sv[mask] ** 0.5 + sv[mask]) >= pv[mask]))
    ok = (0.4 <= fit.alpha_hat <= 0.6 and 0.9 <= fit.beta_hat <= 1.1
          and chat <= 1.1 and holds
          and fit.single_exponent_feasible is False)
    _report(5, ok, f"alpha_hat={fit.alpha_hat:.3f}, beta_hat={fit.beta_hat:.3f}, "
            f"validation constant {chat:.4f} <= 1.1 on 1e5 points, "
            f"single-exponent bound impossible on the tested grid")


def test_criterion_6_two_exponent_certificate(problems):
    p = problems["ex5final"].problem
    cert = certify_exactness(p, PenaltySpec("twopower", 2.0, alpha=0.5, beta=1.0),
                             budget=BIG, seed=13)
    ok = (cert.status == STATUS_CERTIFIED
          and abs(cert.penalized_inf - 0.0) <= 1e-6
          and BIG.samples >= 100_000)
    _report(6, ok, f"{cert.status} with penalized_inf={cert.penalized_inf:.2e} "
            f"over {BIG.samples} samples plus multistart refinement")


def test_criterion_7_curvature_form_and_first_kind_path(problems):
    p = problems["vd42i"].problem
    cert = certify_exactness(p, PenaltySpec("curvature", 1.0, alpha=1.0),
                             budget=BUDGET, seed=13)
    fs = minimize_feasible(p, BUDGET, seed=13)
    verdict = probe_sequence_types(gap_field(p, fs.best_value),
                                   residual_field(p, default_residual_spec(p)),
                                   p.domain, BUDGET, seed=13)
    nrm, ph, ps = verdict.first_diagnostics[-1] if verdict.first_diagnostics \
        else (0.0, 0.0, 1.0)
    ok = (cert.status == STATUS_CERTIFIED
          and verdict.first_found and ps <= 1e-2 and ph >= 10.0)
    _report(7, ok, f"curvature form {cert.status}; first-kind witness with "
            f"terminal residual {ps:.2e} and gap {ph:.1f}")


def test_criterion_8_clipped_residual_fails_every_power(problems):
    p = problems["vd42ii"].problem
    rspec = default_residual_spec(p)
    fs = minimize_feasible(p, BUDGET, seed=13)
    estimates = {a: estimate_cstar(p, rspec, fs.best_value, BUDGET, seed=13,
                                   pspec=PenaltySpec("power", 1.0, alpha=a))
                 for a in (0.25, 0.5, 1.0)}
    cert = certify_exactness(p, PenaltySpec("power", 2.0, alpha=0.5),
                             budget=BUDGET, seed=13)
    ok = (all(e.status == "unbounded" for e in estimates.values())
          and cert.status == STATUS_UNBOUNDED)
    _report(8, ok, "ratio threshold unbounded for alpha in {0.25, 0.5, 1}; "
            f"power-form certificate {cert.status}")


def test_criterion_9_asymptotic_cluster_value(problems):
    loaded = problems["ex4ii"]
    p = loaded.problem
    families = tuple(PathFamily(c) for c in loaded.kinf_paths)
    rep = k_infinity_probe(p, families, budget=BUDGET, seed=7)
    t, diag = rep.cluster_values[0] if rep.cluster_values else (math.nan, {})
    ok = (rep.c2_verdict == "ViolatedWithWitness"
          and abs(rep.witness_t - math.exp(-1)) <= 0.05
          and diag.get("norm_nu", math.inf) <= 1e-2)
    _report(9, ok, f"{rep.c2_verdict} at t={rep.witness_t:.5f} "
            f"(reciprocal-of-e level), terminal |x|*nu={diag.get('norm_nu'):.2e}")


def test_criterion_10_property_suites(problems, calm_scans):
    details = []

    # (a) finite differences against the symbolic polynomial oracle
    rng = np.random.default_rng(424242)
    for _ in range(1000):
        n = int(rng.integers(1, 5))
        e = random_polynomial(rng, n)
        x = rng.standard_normal(n)
        nrm = np.linalg.norm(x)
        if nrm > 0:
            x = x * (rng.random() ** (1.0 / n) * 10.0 / nrm)
        assert np.linalg.norm(fd_gradient(e, x, h=1e-6) - poly_gradient(e, x)) <= 1e-4
    details.append("1000 gradient-vs-symbolic checks at 1e-4")

    # (b) projection optimality against random members
    from penaltylab.cones import ConeFactor, ConeSet
    cones = [ConeSet((ConeFactor.zero(), ConeFactor.nonpos())),
             ConeSet((ConeFactor.interval(-1, 2),)),
             ConeSet((ConeFactor.nonneg(), ConeFactor.line()))]
    for cone in cones:
        lo, hi = cone.bounds()
        y = rng.uniform(-5, 5, size=cone.m)
        proj = project_to_cone(y, cone)
        for _ in range(1000):
            z = np.clip(rng.uniform(-50, 50, size=cone.m), lo, hi)
            assert np.linalg.norm(y - proj) <= np.linalg.norm(y - z) + 1e-12
    details.append("1000 projection-optimality checks per cone")

    # (c) certifier consistency across the corpus, on the declared forms:
    # a finite threshold estimate at weight 2c must never be refuted, and a
    # diverging perturbation scan must never certify a plain form
    checked = 0
    for name, loaded in problems.items():
        p = loaded.problem
        rspec = default_residual_spec(p)
        declared = set()
        for command in ("certify", "cstar"):
            for block in loaded.expectations.get(command, {}).values():
                if "penalty" in block:
                    declared.add(block["penalty"])
        if not declared:
            continue
        fs = minimize_feasible(p, BUDGET, seed=loaded.seed)
        for spec_text in sorted(declared):
            pspec = parse_penalty_spec(spec_text)
            est = estimate_cstar(p, rspec, fs.best_value, BUDGET,
                                 seed=loaded.seed, pspec=pspec)
            if est.status != "finite":
                continue
            c2 = max(2.0 * est.value, 1e-3)
            retry = PenaltySpec(pspec.form, c2, pspec.alpha, pspec.beta)
            cert = certify_exactness(p, retry, rspec, BUDGET, seed=loaded.seed)
            assert cert.status != STATUS_COUNTEREXAMPLE, (name, spec_text, c2)
            checked += 1
    details.append(f"{checked} finite-threshold doubling checks")

    for name, scan in calm_scans.items():
        if not scan.diverging:
            continue
        p = problems[name].problem
        for c in (1.0, 10.0, 100.0, 1000.0):
            cert = certify_exactness(p, PenaltySpec("plain", c), budget=BUDGET,
                                     seed=7)
            assert cert.status != STATUS_CERTIFIED, (name, c)
    details.append("diverging scans never coexist with plain certificates (c <= 1e3)")

    # (d) parser round-trip over every corpus expression
    for name, loaded in problems.items():
        p = loaded.problem
        exprs = [p.objective]
        if isinstance(p.feasibility, ConeForm):
            exprs.extend(p.feasibility.g)
        else:
            exprs.append(p.feasibility.psi)
        for e in exprs:
            assert parse(to_text(e), e.n) == e
    details.append("corpus expressions round-trip")

    # (e) bitwise determinism of reports with a fixed seed
    rep1, ok1 = run_corpus(pattern="ex3*", budget=BUDGET, seed=11)
    rep2, ok2 = run_corpus(pattern="ex3*", budget=BUDGET, seed=11)
    assert ok1 and ok2
    assert rep1.to_csv(stable=True) == rep2.to_csv(stable=True)
    c1 = certify_exactness(problems["ex4iii"].problem, PenaltySpec("plain", 1.5),
                           budget=BUDGET, seed=5)
    c2 = certify_exactness(problems["ex4iii"].problem, PenaltySpec("plain", 1.5),
                           budget=BUDGET, seed=5)
    assert c1 == c2
    details.append("reports byte-identical across reruns")

    _report(10, True, "; ".join(details))
