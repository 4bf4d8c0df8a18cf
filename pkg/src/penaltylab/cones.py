"""Target sets built from products of 1-D closed factors, and feasible sets.

A :class:`ConeSet` is a product ``F_1 x ... x F_m`` where every factor is
one of ``{0}``, ``(-inf, 0]``, ``[0, inf)``, ``[a, b]`` or the full line.
Each factor is stored as a ``(lo, hi)`` pair so that projection is a clamp
and translating the whole set (used by the perturbation scans) is an
offset on both ends.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .expr import Expression, evaluate, eval_many, EvalError

__all__ = [
    "EmptyIntervalError", "NotInConeError",
    "ConeFactor", "ConeSet", "ConeForm", "ResidualForm",
    "parse_cone_factor", "format_cone_factor",
    "project_to_cone", "dist_to_cone", "normal_cone_directions",
    "is_member", "residual_of_set",
]


class EmptyIntervalError(ValueError):
    """interval(a, b) with a > b."""


class NotInConeError(ValueError):
    """A point handed to a normal-cone query lies outside the set."""


@dataclass(frozen=True)
class ConeFactor:
    lo: float
    hi: float

    def __post_init__(self):
        if self.lo > self.hi:
            raise EmptyIntervalError(f"interval({self.lo}, {self.hi}) is empty")
        if math.isnan(self.lo) or math.isnan(self.hi):
            raise ValueError("interval bounds must not be nan")

    @staticmethod
    def zero():
        return ConeFactor(0.0, 0.0)

    @staticmethod
    def nonpos():
        return ConeFactor(-math.inf, 0.0)

    @staticmethod
    def nonneg():
        return ConeFactor(0.0, math.inf)

    @staticmethod
    def interval(a, b):
        return ConeFactor(float(a), float(b))

    @staticmethod
    def line():
        return ConeFactor(-math.inf, math.inf)

    def translate(self, u):
        lo = self.lo + u if math.isfinite(self.lo) else self.lo
        hi = self.hi + u if math.isfinite(self.hi) else self.hi
        return ConeFactor(lo, hi)


_FACTOR_RE = re.compile(r"interval\(\s*([^,\s]+)\s*,\s*([^)\s]+)\s*\)")


def parse_cone_factor(text):
    t = text.strip()
    if t == "zero":
        return ConeFactor.zero()
    if t == "nonpos":
        return ConeFactor.nonpos()
    if t == "nonneg":
        return ConeFactor.nonneg()
    if t == "line":
        return ConeFactor.line()
    m = _FACTOR_RE.fullmatch(t)
    if m:
        return ConeFactor.interval(float(m.group(1)), float(m.group(2)))
    raise ValueError(f"unknown cone factor {text!r} "
                     "(expected zero | nonpos | nonneg | interval(a,b) | line)")


def format_cone_factor(f):
    if f.lo == 0.0 and f.hi == 0.0:
        return "zero"
    if f.lo == -math.inf and f.hi == 0.0:
        return "nonpos"
    if f.lo == 0.0 and f.hi == math.inf:
        return "nonneg"
    if f.lo == -math.inf and f.hi == math.inf:
        return "line"
    return f"interval({f.lo:g},{f.hi:g})"


@dataclass(frozen=True)
class ConeSet:
    factors: tuple

    def __post_init__(self):
        if len(self.factors) < 1:
            raise ValueError("a cone set needs at least one factor")

    @property
    def m(self):
        return len(self.factors)

    def bounds(self):
        lo = np.array([f.lo for f in self.factors])
        hi = np.array([f.hi for f in self.factors])
        return lo, hi

    def translate(self, u):
        u = np.asarray(u, dtype=float)
        if u.shape != (self.m,):
            raise ValueError(f"translation has shape {u.shape}, expected ({self.m},)")
        return ConeSet(tuple(f.translate(float(ui)) for f, ui in zip(self.factors, u)))


def project_to_cone(y, cone):
    """Componentwise nearest point of ``cone``; realizes dist(y, cone)."""
    y = np.asarray(y, dtype=float)
    lo, hi = cone.bounds()
    return np.clip(y, lo, hi)


def dist_to_cone(y, cone):
    y = np.asarray(y, dtype=float)
    return float(np.linalg.norm(y - project_to_cone(y, cone)))


def project_many(Y, cone):
    Y = np.asarray(Y, dtype=float)
    lo, hi = cone.bounds()
    return np.clip(Y, lo, hi)


def dist_many(Y, cone):
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    return np.linalg.norm(Y - project_many(Y, cone), axis=1)


def _factor_rays(f, yi):
    """Allowed (negative, positive) normal rays of one factor at yi."""
    at_lo = math.isfinite(f.lo) and yi <= f.lo
    at_hi = math.isfinite(f.hi) and yi >= f.hi
    return (at_lo, at_hi)


def normal_cone_directions(y, cone, resolution=64, tol=1e-9):
    """Unit directions spanning the normal cone of a factor product at y.

    ``y`` must lie in the cone within ``tol`` (it is snapped componentwise
    first).  Single active factors contribute their axis rays; every pair
    of active factors is discretized with ``resolution`` points on the
    corresponding circle, filtered to the allowed sign pattern.  Doubling
    ``resolution`` refines the grid without dropping existing directions.
    """
    y = np.asarray(y, dtype=float)
    if y.shape != (cone.m,):
        raise ValueError(f"point has shape {y.shape}, expected ({cone.m},)")
    snapped = project_to_cone(y, cone)
    off = np.abs(y - snapped)
    if np.any(off > tol):
        i = int(np.argmax(off))
        raise NotInConeError(
            f"component {i} is {off[i]:.3e} away from its factor (tol {tol:g})")

    rays = [_factor_rays(f, yi) for f, yi in zip(cone.factors, snapped)]
    active = [i for i, (neg, pos) in enumerate(rays) if neg or pos]

    out = []
    seen = set()

    def push(vec):
        key = tuple(np.round(vec, 12))
        if key not in seen:
            seen.add(key)
            out.append(vec)

    for i in active:
        neg, pos = rays[i]
        if pos:
            e = np.zeros(cone.m)
            e[i] = 1.0
            push(e)
        if neg:
            e = np.zeros(cone.m)
            e[i] = -1.0
            push(e)

    for a in range(len(active)):
        for b in range(a + 1, len(active)):
            i, j = active[a], active[b]
            for k in range(resolution):
                th = 2.0 * math.pi * k / resolution
                ci, cj = math.cos(th), math.sin(th)
                if ci > 0 and not rays[i][1]:
                    continue
                if ci < 0 and not rays[i][0]:
                    continue
                if cj > 0 and not rays[j][1]:
                    continue
                if cj < 0 and not rays[j][0]:
                    continue
                v = np.zeros(cone.m)
                v[i], v[j] = ci, cj
                nrm = float(np.linalg.norm(v))
                if nrm > 0:
                    push(v / nrm)

    if not out:
        return np.empty((0, cone.m))
    arr = np.array(sorted(out, key=lambda v: tuple(v)))
    arr.setflags(write=False)
    return arr


# ---------------------------------------------------------------------------
# feasible sets

@dataclass(frozen=True)
class ConeForm:
    """x in S  <=>  g_i(x) in factor_i for every component."""

    g: tuple  # tuple[Expression, ...]
    cone: ConeSet

    def __post_init__(self):
        if len(self.g) != self.cone.m:
            raise ValueError(
                f"{len(self.g)} constraint expressions for {self.cone.m} cone factors")


@dataclass(frozen=True)
class ResidualForm:
    """x in S  <=>  psi(x) = 0, with psi asserted nonnegative."""

    psi: Expression


def g_values(form, x):
    return np.array([evaluate(gi, x) for gi in form.g])


def g_values_many(form, X):
    return np.stack([eval_many(gi, X) for gi in form.g], axis=1)


def residual_of_set(feasibility, x):
    """Constraint violation at ``x``: dist(g(x), C) or psi(x)."""
    if isinstance(feasibility, ConeForm):
        gv = g_values(feasibility, x)
        if not np.all(np.isfinite(gv)):
            raise EvalError("constraint value is not finite")
        return dist_to_cone(gv, feasibility.cone)
    return evaluate(feasibility.psi, x)


def residual_of_set_many(feasibility, X):
    if isinstance(feasibility, ConeForm):
        G = g_values_many(feasibility, X)
        bad = np.isnan(G).any(axis=1) | np.isinf(G).any(axis=1)
        G = np.where(np.isfinite(G), G, 0.0)
        d = dist_many(G, feasibility.cone)
        return np.where(bad, np.nan, d)
    return eval_many(feasibility.psi, X)


def is_member(x, feasibility, tol=1e-9):
    """Membership test at tolerance ``tol``; evaluation failures propagate."""
    return residual_of_set(feasibility, x) <= tol
