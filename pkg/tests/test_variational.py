import math

import numpy as np
import pytest

from penaltylab.cones import ConeFactor, ConeForm, ConeSet
from penaltylab.expr import parse
from penaltylab.problem import Problem
from penaltylab.solver import Budget, SearchDomain
from penaltylab.variational import (InfeasiblePointError, PathFamily,
                                    k_infinity_probe, mfcq_check, nu_estimate)

B = Budget(starts=12, iters=200, samples=10_000)


def cone_problem(name, n, obj, gs, escape=1e3):
    g = tuple(parse(s, n) for s in gs)
    return Problem(name, n, parse(obj, n),
                   ConeForm(g, ConeSet(tuple(ConeFactor.zero() for _ in gs))),
                   SearchDomain.box([-10] * n, [10] * n, escape))


EX4I = cone_problem("ex4i", 1, "x0^3", ["x0^2"])
EX4II = cone_problem("ex4ii", 2, "exp(x0*x1)", ["x0"], escape=1e6)
EX4III = cone_problem("ex4iii", 2, "x0 - x1", ["x0 - x1"])
EX4IV = cone_problem("ex4iv", 2, "x0^3 + x1^2", ["x0"])


# ------------------------------------------------------------------ nu

def test_nu_degenerate_square_constraint():
    probe = nu_estimate(EX4I, [0.0], seed=3)
    assert probe.nu_hat <= 1e-6


def test_nu_affine_cancellation_at_half():
    probe = nu_estimate(EX4III, [1.0, 0.0], seed=3)
    assert probe.nu_hat <= 1e-3
    assert abs(probe.lam - 0.5) <= 0.02


def test_nu_exponential_hyperbola_scaling():
    k = 32.0
    probe = nu_estimate(EX4II, [1.0 / k, -k], seed=3)
    assert probe.nu_hat <= 1e-2


def test_nu_reported_minimizer_reproduces_value():
    probe = nu_estimate(EX4III, [1.0, 0.0], seed=3)
    mix = probe.lam * np.asarray(probe.u) + (1.0 - probe.lam) * np.asarray(probe.v)
    assert abs(np.linalg.norm(mix) - probe.nu_hat) <= 1e-12


def test_nu_empty_directions_is_infinite():
    # interior of a half-line factor: no unit normal at the projection
    p = Problem("hl", 1, parse("x0", 1),
                ConeForm((parse("x0", 1),), ConeSet((ConeFactor.nonpos(),))),
                SearchDomain.box([-10], [10], 1e3))
    probe = nu_estimate(p, [-2.0], seed=3)
    assert probe.nu_hat == math.inf


def test_nu_monotone_under_refinement():
    base = dict(cloud_count=16, w_resolution=32, lambda_points=63, seed=3)
    for problem, x in ((EX4III, [1.0, 0.0]), (EX4II, [0.25, -4.0]),
                       (EX4I, [0.5])):
        v1 = nu_estimate(problem, x, **base).nu_hat
        v2 = nu_estimate(problem, x, cloud_count=32, w_resolution=64,
                         lambda_points=127, seed=3).nu_hat
        assert v2 <= v1 + 1e-15


# ------------------------------------------------------------------ mfcq

def test_mfcq_degenerate_gradient():
    rep = mfcq_check(EX4I, [0.0], seed=3)
    assert rep.holds is False
    assert rep.min_norm <= 1e-3


def test_mfcq_clean_line_constraint():
    rep = mfcq_check(EX4IV, [0.0, 0.0], seed=3)
    assert rep.holds is True
    assert abs(rep.min_norm - 1.0) <= 1e-3


def test_mfcq_affine_difference():
    rep = mfcq_check(EX4III, [0.0, 0.0], seed=3)
    assert rep.holds is True
    assert abs(rep.min_norm - math.sqrt(2.0)) <= 1e-3


def test_mfcq_requires_feasible_point():
    with pytest.raises(InfeasiblePointError):
        mfcq_check(EX4IV, [1.0, 0.0], seed=3)


# ------------------------------------------------------------------ kinf

def test_kinf_hyperbolic_family_hits_reciprocal_level():
    fam = PathFamily((parse("x0^(-1)", 1), parse("0 - x0", 1)))
    rep = k_infinity_probe(EX4II, families=(fam,), budget=B, seed=3)
    assert rep.c2_verdict == "ViolatedWithWitness"
    assert abs(rep.witness_t - math.exp(-1)) <= 0.05
    t, diag = rep.cluster_values[0]
    assert diag["norm"] >= 1e3
    assert diag["norm_nu"] <= 1e-2
    assert diag["dist"] <= 1e-3


def test_kinf_growing_objective_has_no_cluster():
    rep = k_infinity_probe(EX4IV, budget=B, seed=3)
    assert rep.c2_verdict == "HoldsOnProbes"
    assert rep.cluster_values == ()


def test_kinf_everything_feasible_has_no_witness():
    p = Problem("allfeas", 1, parse("x0^2", 1),
                ConeForm((parse("0", 1),), ConeSet((ConeFactor.zero(),))),
                SearchDomain.box([-10], [10], 1e3))
    rep = k_infinity_probe(p, budget=B, seed=3)
    assert rep.c2_verdict == "HoldsOnProbes"
    assert rep.cluster_values == ()


def test_kinf_witness_revalidates():
    fam = PathFamily((parse("x0^(-1)", 1), parse("0 - x0", 1)))
    rep = k_infinity_probe(EX4II, families=(fam,), budget=B, seed=3)
    t, diag = rep.cluster_values[0]
    term = np.asarray(rep.paths[0][-1])
    probe = nu_estimate(EX4II, term, seed=3)
    nrm = float(np.linalg.norm(term))
    assert abs(nrm * probe.nu_hat - diag["norm_nu"]) <= 1e-9
    from penaltylab.cones import residual_of_set
    assert abs(residual_of_set(EX4II.feasibility, term) - diag["dist"]) <= 1e-9
