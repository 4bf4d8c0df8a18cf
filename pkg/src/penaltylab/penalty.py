"""Residual functions and the four penalty forms.

A residual vanishes exactly on the feasible set and is nonnegative
everywhere else.  The penalized objective is one of

    plain(c)                f + c * psi
    power(c, a)             f + c * psi^a
    twopower(c, a, b)       f + c * (psi^a + psi^b),   a <= 1 <= b
    curvature(c, a)         f + c * (1 + f^2) * psi^a

``psi^a`` at ``psi = 0`` is 0 for every positive exponent (continuous
extension), so penalized and raw objective agree exactly on feasible
points.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .cones import ConeForm, g_values, g_values_many, residual_of_set, residual_of_set_many
from .expr import evaluate, eval_many

__all__ = [
    "NegativeResidualError", "ResidualSpec", "PenaltySpec",
    "parse_penalty_spec", "format_penalty_spec",
    "residual_eval", "residual_eval_many",
    "penalized_eval", "penalized_eval_many",
    "effective_residual", "effective_residual_many",
    "default_residual_spec",
]

_CLAMP = 1e-12  # floating-point noise band for custom residuals near S


class NegativeResidualError(ValueError):
    """A custom residual came back negative beyond the clamp band."""


@dataclass(frozen=True)
class ResidualSpec:
    """How constraint violation is measured.

    kind ``dist``     distance of g(x) to the cone (cone-form problems)
    kind ``maxplus``  max(g_1(x), ..., g_m(x), 0) for inequality systems
    kind ``custom``   a user expression, validated nonnegative
    """

    kind: str
    custom: object = None  # Expression for kind == "custom"

    def __post_init__(self):
        if self.kind not in ("dist", "maxplus", "custom"):
            raise ValueError(f"unknown residual kind {self.kind!r}")
        if self.kind == "custom" and self.custom is None:
            raise ValueError("custom residual needs an expression")


def default_residual_spec(problem):
    """dist for cone-form feasibility, the declared psi otherwise."""
    if isinstance(problem.feasibility, ConeForm):
        return ResidualSpec("dist")
    return ResidualSpec("custom", problem.feasibility.psi)


@dataclass(frozen=True)
class PenaltySpec:
    form: str  # plain | power | twopower | curvature
    c: float
    alpha: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        if self.form not in ("plain", "power", "twopower", "curvature"):
            raise ValueError(f"unknown penalty form {self.form!r}")
        if not (self.c > 0):
            raise ValueError("penalty weight c must be positive")
        if not (0.0 < self.alpha <= 1.0):
            raise ValueError("alpha must lie in (0, 1]")
        if self.form == "twopower" and self.beta < 1.0:
            raise ValueError("twopower needs alpha <= 1 <= beta")


_PSPEC_RE = re.compile(r"(plain|power|twopower|curvature)\(([^)]*)\)")


def parse_penalty_spec(text):
    """Parse ``plain(c) | power(c,alpha) | twopower(c,alpha,beta) | curvature(c,alpha)``."""
    m = _PSPEC_RE.fullmatch(text.strip())
    if not m:
        raise ValueError(f"cannot parse penalty spec {text!r}")
    form = m.group(1)
    args = [float(a) for a in m.group(2).split(",") if a.strip()]
    want = {"plain": 1, "power": 2, "twopower": 3, "curvature": 2}[form]
    if len(args) != want:
        raise ValueError(f"{form} takes {want} parameter(s), got {len(args)}")
    if form == "plain":
        return PenaltySpec("plain", args[0])
    if form == "power":
        return PenaltySpec("power", args[0], alpha=args[1])
    if form == "twopower":
        return PenaltySpec("twopower", args[0], alpha=args[1], beta=args[2])
    return PenaltySpec("curvature", args[0], alpha=args[1])


def format_penalty_spec(p):
    if p.form == "plain":
        return f"plain({p.c:g})"
    if p.form == "power":
        return f"power({p.c:g},{p.alpha:g})"
    if p.form == "twopower":
        return f"twopower({p.c:g},{p.alpha:g},{p.beta:g})"
    return f"curvature({p.c:g},{p.alpha:g})"


# ---------------------------------------------------------------------------
# evaluation

def residual_eval(rspec, problem, x):
    """Nonnegative extended-real violation measure at ``x``."""
    if rspec.kind == "dist":
        if not isinstance(problem.feasibility, ConeForm):
            raise ValueError("dist residual needs a cone-form problem")
        return residual_of_set(problem.feasibility, x)
    if rspec.kind == "maxplus":
        if not isinstance(problem.feasibility, ConeForm):
            raise ValueError("maxplus residual needs constraint expressions")
        vals = g_values(problem.feasibility, x)
        return float(max(vals.max(), 0.0))
    v = evaluate(rspec.custom, x)
    if v < 0.0:
        if v < -_CLAMP:
            raise NegativeResidualError(f"residual {v!r} at {tuple(x)}")
        return 0.0
    return v


def residual_eval_many(rspec, problem, X):
    """Vectorized residual; invalid lanes are nan."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if rspec.kind == "dist":
        return residual_of_set_many(problem.feasibility, X)
    if rspec.kind == "maxplus":
        G = g_values_many(problem.feasibility, X)
        bad = np.isnan(G).any(axis=1)
        v = np.maximum(np.nanmax(np.where(np.isnan(G), -np.inf, G), axis=1), 0.0)
        return np.where(bad, np.nan, v)
    v = eval_many(rspec.custom, X)
    v = np.where((v < 0.0) & (v >= -_CLAMP), 0.0, v)
    return np.where(v < -_CLAMP, np.nan, v)


def _pow_ext(v, a):
    # v >= 0 extended real; 0^a = 0 for a > 0
    if v == math.inf:
        return math.inf
    if v == 0.0:
        return 0.0
    return v ** a


def penalty_term(pspec, psi, f=None):
    """Value added to f(x) by the penalty, given psi(x) (and f(x) if needed)."""
    if psi == math.inf:
        return math.inf
    if pspec.form == "plain":
        return pspec.c * psi
    if pspec.form == "power":
        return pspec.c * _pow_ext(psi, pspec.alpha)
    if pspec.form == "twopower":
        return pspec.c * (_pow_ext(psi, pspec.alpha) + _pow_ext(psi, pspec.beta))
    # curvature: weight only defined for finite f; f = +inf swamps everything
    if f == math.inf:
        return math.inf
    return pspec.c * (1.0 + f * f) * _pow_ext(psi, pspec.alpha)


def penalized_eval(problem, pspec, rspec, x):
    """f(x) + penalty, in extended reals."""
    f = evaluate(problem.objective, x)
    psi = residual_eval(rspec, problem, x)
    if f == math.inf:
        return math.inf
    t = penalty_term(pspec, psi, f)
    if t == math.inf:
        return math.inf
    return f + t


def _pow_many(v, a):
    with np.errstate(all="ignore"):
        out = np.where(v == 0.0, 0.0, v ** a)
    return out


def penalized_eval_many(problem, pspec, rspec, X):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    f = eval_many(problem.objective, X)
    psi = residual_eval_many(rspec, problem, X)
    bad = np.isnan(f) | np.isnan(psi)
    psi = np.where(bad, 0.0, psi)
    with np.errstate(all="ignore"):
        if pspec.form == "plain":
            t = pspec.c * psi
        elif pspec.form == "power":
            t = pspec.c * _pow_many(psi, pspec.alpha)
        elif pspec.form == "twopower":
            t = pspec.c * (_pow_many(psi, pspec.alpha) + _pow_many(psi, pspec.beta))
        else:
            fw = np.where(np.isposinf(f), 0.0, f)
            t = pspec.c * (1.0 + fw * fw) * _pow_many(psi, pspec.alpha)
        out = f + t
        out = np.where(np.isposinf(f), np.inf, out)
    return np.where(bad, np.nan, out)


def effective_residual(pspec, rspec, problem, x):
    """The residual the ratio inequality is tested against for this form.

    plain -> psi, power -> psi^a, twopower -> psi^a + psi^b,
    curvature -> (1 + f^2) psi^a.  Each of these vanishes exactly on S,
    so it is itself a residual function.
    """
    psi = residual_eval(rspec, problem, x)
    if pspec.form == "plain":
        return psi
    if pspec.form == "power":
        return _pow_ext(psi, pspec.alpha)
    if pspec.form == "twopower":
        return _pow_ext(psi, pspec.alpha) + _pow_ext(psi, pspec.beta)
    f = evaluate(problem.objective, x)
    if f == math.inf or psi == math.inf:
        return math.inf
    return (1.0 + f * f) * _pow_ext(psi, pspec.alpha)


def effective_residual_many(pspec, rspec, problem, X):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    psi = residual_eval_many(rspec, problem, X)
    with np.errstate(all="ignore"):
        if pspec.form == "plain":
            out = psi
        elif pspec.form == "power":
            out = _pow_many(psi, pspec.alpha)
        elif pspec.form == "twopower":
            out = _pow_many(psi, pspec.alpha) + _pow_many(psi, pspec.beta)
        else:
            f = eval_many(problem.objective, X)
            out = (1.0 + f * f) * _pow_many(psi, pspec.alpha)
            out = np.where(np.isnan(f), np.nan, out)
    return out
