import math

import numpy as np
import pytest

from penaltylab.certify import (STATUS_CERTIFIED, STATUS_COUNTEREXAMPLE,
                                STATUS_UNBOUNDED, certify_exactness,
                                estimate_cstar, expr_field, fit_envelope,
                                gap_field, probe_distance_conditions,
                                probe_sequence_types, residual_field,
                                scan_value_function)
from penaltylab.cones import ConeFactor, ConeForm, ConeSet, ResidualForm
from penaltylab.expr import parse
from penaltylab.penalty import PenaltySpec, ResidualSpec, default_residual_spec
from penaltylab.problem import Problem
from penaltylab.solver import Budget, SearchDomain

B = Budget(starts=16, iters=260, samples=60_000)


def cone_problem(name, n, obj, gs, escape=1e3):
    g = tuple(parse(s, n) for s in gs)
    return Problem(name, n, parse(obj, n),
                   ConeForm(g, ConeSet(tuple(ConeFactor.zero() for _ in gs))),
                   SearchDomain.box([-10] * n, [10] * n, escape))


EX4I = cone_problem("ex4i", 1, "x0^3", ["x0^2"])
EX4II = cone_problem("ex4ii", 2, "exp(x0*x1)", ["x0"], escape=1e6)
EX4III = cone_problem("ex4iii", 2, "x0 - x1", ["x0 - x1"])
EX4IV = cone_problem("ex4iv", 2, "x0^3 + x1^2", ["x0"])
VD42I = Problem("vd42i", 1, parse("x0", 1),
                ResidualForm(parse("abs(x0) / (1 + x0^2)", 1)),
                SearchDomain.box([-10], [10], 1e3))
VD42II = Problem("vd42ii", 1, parse("x0", 1),
                 ResidualForm(parse("pw((abs(x0) - 1 <= 0: abs(x0)), default: 1)", 1)),
                 SearchDomain.box([-10], [10], 1e7))
DOM1 = SearchDomain.box([-10], [10], 1e3)
DOM2 = SearchDomain.box([-10, -10], [10, 10], 1e3)


# ------------------------------------------------------------------- cstar

def test_cstar_affine_ratio_is_one():
    est = estimate_cstar(EX4III, ResidualSpec("dist"), 0.0, B, seed=7)
    assert est.status == "finite"
    assert abs(est.value - 1.0) <= 1e-3


def test_cstar_exponential_blows_up():
    est = estimate_cstar(EX4II, ResidualSpec("dist"), 1.0, B, seed=7)
    assert est.status == "unbounded"
    # the refinement trail pushes the first coordinate to zero while the
    # product coordinate runs away
    tail = np.asarray(est.path[-1])
    assert abs(tail[0]) <= 1e-3 and tail[0] * tail[1] <= -2.0


def test_cstar_clipped_residual_blows_up_for_every_exponent():
    rspec = default_residual_spec(VD42II)
    for alpha in (0.25, 0.5, 1.0):
        est = estimate_cstar(VD42II, rspec, 0.0, B, seed=7,
                             pspec=PenaltySpec("power", 1.0, alpha=alpha))
        assert est.status == "unbounded", alpha


def test_cstar_inconclusive_when_nothing_is_infeasible():
    # g identically zero: the whole space is feasible, no ratio sample exists
    p = Problem("allfeas", 1, parse("x0^2", 1),
                ConeForm((parse("0", 1),), ConeSet((ConeFactor.zero(),))),
                SearchDomain.box([-10], [10], 1e3))
    est = estimate_cstar(p, ResidualSpec("dist"), 0.0,
                         Budget(starts=8, iters=80, samples=4000), seed=7)
    assert est.status == "inconclusive"


# ----------------------------------------------------------------- certify

def test_certify_statuses_match_known_cases():
    assert certify_exactness(EX4III, PenaltySpec("plain", 1.5), budget=B,
                             seed=7).status == STATUS_CERTIFIED
    assert certify_exactness(EX4I, PenaltySpec("plain", 10.0), budget=B,
                             seed=7).status == STATUS_UNBOUNDED
    cert = certify_exactness(EX4III, PenaltySpec("plain", 0.5), budget=B, seed=7)
    assert cert.status == STATUS_COUNTEREXAMPLE
    assert cert.witness_ratio > 0.99


def test_certified_witness_is_feasible_argmin():
    from penaltylab.cones import residual_of_set
    cert = certify_exactness(EX4III, PenaltySpec("plain", 1.5), budget=B, seed=7)
    assert residual_of_set(EX4III.feasibility, np.asarray(cert.witness)) <= 1e-6
    from penaltylab.expr import evaluate
    assert abs(evaluate(EX4III.objective, cert.witness) - cert.fstar) <= 1e-4
    assert cert.argmin_transfer is True


def test_certify_boundary_weight_keeps_value_exactness():
    cert = certify_exactness(VD42I, PenaltySpec("curvature", 1.0, alpha=1.0),
                             budget=B, seed=7)
    assert cert.status == STATUS_CERTIFIED
    assert abs(cert.penalized_inf) <= 1e-6
    # at the threshold weight itself, minimizers need not transfer
    assert cert.argmin_transfer in (True, False)


# ---------------------------------------------------------------- calmness

def test_calmness_exponential_diverges():
    scan = scan_value_function(EX4II, budget=Budget(starts=8, iters=220, samples=1000),
                               seed=7)
    assert scan.diverging is True
    assert abs(scan.v0 - 1.0) <= 1e-6
    for u, v in zip(scan.u_grid, scan.values):
        nrm = math.sqrt(sum(c * c for c in u))
        if v is not None and abs(nrm - 1e-3) < 1e-15:
            assert (scan.v0 - v) / nrm >= 100.0


def test_calmness_affine_modulus_one():
    scan = scan_value_function(EX4III, budget=Budget(starts=8, iters=220, samples=1000),
                               seed=7)
    assert scan.diverging is False
    assert abs(scan.modulus_estimate - 1.0) <= 0.1


def test_calmness_cubic_value_curve():
    scan = scan_value_function(EX4IV, budget=Budget(starts=8, iters=220, samples=1000),
                               seed=7)
    assert scan.diverging is False
    assert scan.modulus_estimate <= 1.1
    for u, v in zip(scan.u_grid, scan.values):
        if v is None or all(c == 0.0 for c in u):
            continue
        assert v == pytest.approx(u[0] ** 3, abs=1e-6)


def test_calmness_needs_cone_form():
    with pytest.raises(ValueError):
        scan_value_function(VD42I, budget=B, seed=7)


# --------------------------------------------------------------- sequences

def test_sequences_rational_residual_both_kinds():
    phi = expr_field(parse("pos(0 - x0)", 1))
    psi = expr_field(parse("abs(x0) / (1 + x0^2)", 1))
    v = probe_sequence_types(phi, psi, DOM1, B, seed=7)
    assert v.first_found and v.second_found
    nrm, ph, ps = v.first_diagnostics[-1]
    assert ps <= 1e-2 and ph >= 10.0


def test_sequences_neither_for_coupled_pair():
    f = expr_field(parse("x0^2", 1))
    v = probe_sequence_types(f, f, DOM1, B, seed=7)
    assert not v.first_found and not v.second_found


def test_sequences_requires_nonnegative_fields():
    with pytest.raises(ValueError):
        probe_sequence_types(expr_field(parse("x0", 1)),
                             expr_field(parse("abs(x0)", 1)), DOM1, B, seed=7)


# ---------------------------------------------------------------- envelope

def test_envelope_split_exponents():
    phi = expr_field(parse("x0^2 + x1^2", 2))
    psi = expr_field(parse("x0^2 + x1^4", 2))
    fit = fit_envelope(phi, psi, budget=B, seed=7, domain=DOM2)
    assert 0.4 <= fit.alpha_hat <= 0.6
    assert 0.9 <= fit.beta_hat <= 1.1
    assert fit.single_exponent_feasible is False
    assert fit.validate_chat <= 1.1


def test_envelope_identity_pair():
    f = expr_field(parse("x0^2", 1))
    fit = fit_envelope(f, f, budget=Budget(starts=8, iters=160, samples=20000),
                       seed=7, domain=DOM1)
    assert abs(fit.alpha_hat - 1.0) <= 0.05
    assert abs(fit.beta_hat - 1.0) <= 0.05
    assert fit.single_exponent_feasible is True


def test_envelope_linear_gap_pair():
    # gap of the affine problem against its own residual: both slopes one
    phi = gap_field(EX4III, 0.0)
    psi = residual_field(EX4III, ResidualSpec("dist"))
    fit = fit_envelope(phi, psi, budget=Budget(starts=8, iters=160, samples=20000),
                       seed=7, domain=DOM2)
    assert abs(fit.alpha_hat - 1.0) <= 0.05
    assert abs(fit.beta_hat - 1.0) <= 0.05


def test_envelope_soundness_on_fresh_sample():
    phi = expr_field(parse("x0^2 + x1^2", 2))
    psi = expr_field(parse("x0^2 + x1^4", 2))
    fit = fit_envelope(phi, psi, budget=B, seed=7, domain=DOM2)
    chat = 2.0 * fit.validate_chat
    rng = np.random.default_rng(12345)
    X = rng.uniform(-100, 100, size=(100_000, 2))
    pv = phi.fn_many(X)
    sv = psi.fn_many(X)
    ok = sv > 1e-8
    lhs = chat * (sv[ok] ** fit.alpha_hat + sv[ok] ** fit.beta_hat)
    assert np.all(lhs >= pv[ok])


def test_envelope_unreachable_levels_are_dropped():
    # the clipped residual never exceeds one, so every large-end level is
    # unattainable: that exponent is reported absent and the levels recorded
    phi = expr_field(parse("pos(0 - x0)", 1))
    psi = expr_field(parse("pw((abs(x0) - 1 <= 0: abs(x0)), default: 1)", 1))
    fit = fit_envelope(phi, psi, budget=Budget(starts=8, iters=120, samples=4000),
                       seed=7, domain=DOM1)
    assert math.isnan(fit.beta_hat)
    assert set(fit.dropped) == {10.0, 100.0, 1000.0, 10000.0, 100000.0, 1000000.0}
    assert math.isfinite(fit.alpha_hat)


def test_envelope_warns_on_exp():
    phi = gap_field(EX4II, 1.0)
    psi = residual_field(EX4II, ResidualSpec("dist"))
    fit = fit_envelope(phi, psi, budget=Budget(starts=4, iters=80, samples=2000),
                       seed=7, domain=EX4II.domain)
    assert any("exp" in w for w in fit.warnings)


# ---------------------------------------------------- distance conditions

def test_distcond_affine_plane_holds():
    rep = probe_distance_conditions(EX4III, budget=B, seed=7)
    assert rep.status == "ok"
    assert rep.c1_holds_on_domain is True
    assert rep.c2_variant_holds is True


def test_distcond_rational_residual_violates_c1():
    rep = probe_distance_conditions(VD42I, budget=B, seed=7)
    assert rep.status == "ok"
    assert rep.c1_holds_on_domain is False
    assert rep.c1_witness  # the escape path is reported
