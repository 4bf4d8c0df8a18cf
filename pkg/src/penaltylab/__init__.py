"""Toolkit for building and numerically certifying exact penalty functions
on problems whose feasible sets may be unbounded."""

__version__ = "0.1.0"

from .expr import Expression, parse, to_text, evaluate, eval_many, fd_gradient, sample_subgradients
from .cones import ConeFactor, ConeSet, ConeForm, ResidualForm
from .penalty import PenaltySpec, ResidualSpec, parse_penalty_spec
from .problem import Problem, load_problem, save_problem
from .solver import Budget, SearchDomain, MinimizeResult, minimize_unconstrained, minimize_feasible
from .certify import (Certificate, certify_exactness, estimate_cstar,
                      scan_value_function, fit_envelope, probe_sequence_types,
                      probe_distance_conditions)
from .variational import nu_estimate, mfcq_check, k_infinity_probe, PathFamily

__all__ = [
    "Expression", "parse", "to_text", "evaluate", "eval_many",
    "fd_gradient", "sample_subgradients",
    "ConeFactor", "ConeSet", "ConeForm", "ResidualForm",
    "PenaltySpec", "ResidualSpec", "parse_penalty_spec",
    "Problem", "load_problem", "save_problem",
    "Budget", "SearchDomain", "MinimizeResult",
    "minimize_unconstrained", "minimize_feasible",
    "Certificate", "certify_exactness", "estimate_cstar",
    "scan_value_function", "fit_envelope", "probe_sequence_types",
    "probe_distance_conditions",
    "nu_estimate", "mfcq_check", "k_infinity_probe", "PathFamily",
]
