"""Exactness certification and its companion probes.

Everything here is domain-qualified: infima are taken over a declared box
plus escape-range probes, ratio suprema over bulk samples plus local
refinement, and sequence/limit statements over finite outward shells.
Statuses say "on the searched domain", never more.

The central test is the ratio inequality: a penalty weight ``c`` is large
enough exactly when ``c * r(x) >= [fstar - f(x)]_+`` for the effective
residual ``r`` of the chosen penalty form.  A certificate combines the
ratio test with a direct comparison of the constrained and penalized
infima and an argmin-transfer check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cones import ConeForm
from .expr import EvalError, eval_many, uses_exp
from .penalty import (PenaltySpec, default_residual_spec,
                      effective_residual, effective_residual_many,
                      penalized_eval, residual_eval, residual_eval_many)
from .problem import Problem
from .solver import (Budget, SearchDomain, minimize_feasible,
                     minimize_unconstrained, safe_fn, _pattern_search, _rng,
                     _repair, _directions, _snap_to_set)

__all__ = [
    "InfeasibleProblemError",
    "Field", "expr_field", "gap_field", "residual_field",
    "CStarEstimate", "Certificate", "CalmnessScan", "EnvelopeFit",
    "SequenceVerdict", "DistanceConditionReport",
    "estimate_cstar", "certify_exactness", "scan_value_function",
    "fit_envelope", "probe_sequence_types", "probe_distance_conditions",
    "STATUS_CERTIFIED", "STATUS_COUNTEREXAMPLE", "STATUS_UNBOUNDED",
    "STATUS_INCONCLUSIVE",
]

STATUS_CERTIFIED = "CertifiedExactOnDomain"
STATUS_COUNTEREXAMPLE = "CounterexampleFound"
STATUS_UNBOUNDED = "UnboundedPenalized"
STATUS_INCONCLUSIVE = "Inconclusive"

_RATIO_FLOOR = 1e-8   # points with effective residual below this are "on S"
_RATIO_BLOWUP = 1e6   # refined ratio beyond this certifies failure for all c
_ROAM_CAP = 1e8       # ratio refinement may travel this far from the origin
_EXP_WARNING = ("expression uses exp: monomial growth fitting is heuristic "
                "here, exponents are not guaranteed to stabilize")


class InfeasibleProblemError(RuntimeError):
    """The residual could not be driven to the feasible band anywhere."""


# ---------------------------------------------------------------------------
# scalar/vector field pairs

@dataclass(frozen=True)
class Field:
    """A scalar function with a paired vectorized evaluator.

    ``fn`` maps a point to a float (``+inf`` allowed, errors absorbed),
    ``fn_many`` maps an (k, n) array to k values with nan for invalid
    lanes.
    """

    fn: object
    fn_many: object
    label: str = ""
    warns_exp: bool = False


def expr_field(e, label=""):
    return Field(safe_fn(e), lambda X: eval_many(e, X), label or str(e), uses_exp(e))


def _as_field(obj):
    from .expr import Expression
    if isinstance(obj, Expression):
        return expr_field(obj)
    return obj


def gap_field(problem, fstar):
    """[fstar - f]_+ as a field; zero wherever f is +inf."""
    f_fn = safe_fn(problem.objective)

    def fn(x):
        v = f_fn(x)
        return 0.0 if v == math.inf else max(fstar - v, 0.0)

    def fn_many(X):
        v = eval_many(problem.objective, X)
        out = np.maximum(fstar - v, 0.0)
        out = np.where(np.isposinf(v), 0.0, out)
        return np.where(np.isnan(v), np.nan, out)

    return Field(fn, fn_many, "[fstar - f]+", uses_exp(problem.objective))


def residual_field(problem, rspec):
    def fn(x):
        try:
            return residual_eval(rspec, problem, x)
        except EvalError:
            return math.inf

    def fn_many(X):
        return residual_eval_many(rspec, problem, X)

    warns = rspec.kind == "custom" and uses_exp(rspec.custom)
    return Field(fn, fn_many, "residual", warns)


def _effective_residual_field(problem, pspec, rspec):
    def fn(x):
        try:
            return effective_residual(pspec, rspec, problem, x)
        except EvalError:
            return math.inf

    def fn_many(X):
        return effective_residual_many(pspec, rspec, problem, X)

    return Field(fn, fn_many, "effective residual")


# ---------------------------------------------------------------------------
# sampling

def _box_shell_samples(domain, count, rng):
    """Half uniform in the box, half on spheres growing to the escape range."""
    lo, hi = domain.arrays()
    n = domain.n
    k_box = max(1, count // 2)
    pts = [lo + (hi - lo) * rng.random((k_box, n))]
    r_box = float(np.max(np.abs(np.stack([lo, hi]))))
    escape = domain.escape_scale
    if escape > r_box * 1.0001:
        radii = np.geomspace(r_box, escape, 12)
        k_each = max(1, (count - k_box) // len(radii))
        for r in radii:
            d = rng.standard_normal((k_each, n))
            nrm = np.linalg.norm(d, axis=1, keepdims=True)
            nrm[nrm == 0] = 1.0
            pts.append((d / nrm) * r)
    return np.vstack(pts)


def _ball_samples(radius, n, count, rng):
    d = rng.standard_normal((count, n))
    nrm = np.linalg.norm(d, axis=1, keepdims=True)
    nrm[nrm == 0] = 1.0
    r = radius * rng.random((count, 1)) ** (1.0 / n)
    return (d / nrm) * r


# ---------------------------------------------------------------------------
# penalty threshold estimation

@dataclass(frozen=True)
class CStarEstimate:
    status: str  # "finite" | "unbounded" | "inconclusive"
    value: float
    witness: tuple = None
    path: tuple = ()
    samples_used: int = 0

    @property
    def unbounded(self):
        return self.status == "unbounded"


def _ratio_fn(problem, pspec, rspec, fstar):
    gap = gap_field(problem, fstar)
    eff = _effective_residual_field(problem, pspec, rspec)

    def fn(x):
        r = eff.fn(x)
        if not (r > _RATIO_FLOOR) or r == math.inf:
            return -math.inf
        g = gap.fn(x)
        return g / r

    def fn_many(X):
        r = eff.fn_many(X)
        g = gap.fn_many(X)
        with np.errstate(all="ignore"):
            out = g / r
        bad = ~np.isfinite(r) | np.isnan(g) | (r <= _RATIO_FLOOR)
        return np.where(bad, -np.inf, out)

    return fn, fn_many


def estimate_cstar(problem, rspec, fstar, budget=Budget(), seed=0, pspec=None):
    """Supremum of [fstar - f]_+ over the effective residual.

    Bulk samples over the box and escape shells seed a local maximization
    of the ratio from the best 32 points; a refined ratio crossing 1e6 is
    reported as unbounded together with the refinement path (no finite
    weight works on the searched domain).  ``pspec`` selects the effective
    residual; the default is the plain residual itself.
    """
    if pspec is None:
        pspec = PenaltySpec("plain", 1.0)
    fn, fn_many = _ratio_fn(problem, pspec, rspec, fstar)
    rng = _rng(seed, 11)
    X = _box_shell_samples(problem.domain, budget.samples, rng)
    ratios = fn_many(X)
    usable = np.isfinite(ratios)
    if not usable.any():
        return CStarEstimate("inconclusive", math.nan, samples_used=len(X))

    order = np.argsort(ratios)[::-1]
    top = []
    seen = set()
    for idx in order[: 40 * 32]:
        if not np.isfinite(ratios[idx]):
            break
        key = tuple(np.round(X[idx], 6))
        if key in seen:
            continue
        seen.add(key)
        top.append(idx)
        if len(top) >= 32:
            break

    lo = -_ROAM_CAP * np.ones(problem.n)
    hi = _ROAM_CAP * np.ones(problem.n)
    best_v, best_x = -math.inf, None
    for idx in top:
        path = [tuple(map(float, X[idx]))]
        x, neg_v, crossed = _pattern_search(
            lambda z: -fn(z), X[idx], -ratios[idx], lo, hi, budget.iters,
            threshold=-_RATIO_BLOWUP,
            record=lambda p, v: path.append(tuple(map(float, p))),
            step0=max(1.0, 0.25 * float(np.max(np.abs(X[idx])))))
        if crossed:
            path.append(tuple(map(float, x)))
            return CStarEstimate("unbounded", math.inf, tuple(map(float, x)),
                                 tuple(path), len(X))
        if -neg_v > best_v:
            best_v, best_x = -neg_v, x
    return CStarEstimate("finite", float(best_v), tuple(map(float, best_x)),
                         samples_used=len(X))


# ---------------------------------------------------------------------------
# certificates

@dataclass(frozen=True)
class Certificate:
    status: str
    fstar: float
    penalized_inf: float
    penalized_unbounded: bool
    cstar_estimate: float
    cstar_unbounded: bool
    witness: tuple
    witness_ratio: float
    argmin_transfer: object  # True/False under the certified status, else None
    domain: SearchDomain
    form: PenaltySpec
    problem_name: str = ""
    notes: tuple = ()


def certify_exactness(problem, pspec, rspec=None, budget=Budget(), seed=0, tol=1e-6):
    """Decide exactness of the chosen penalty form on the searched domain.

    Combines (a) the constrained infimum estimate, (b) the penalized
    infimum estimate with unboundedness probes, and (c) the ratio test
    against the form's effective residual.  An unbounded penalized
    objective dominates; otherwise a ratio or value counterexample is
    reported; otherwise agreement of the infima within ``tol`` certifies
    exactness (value exactness; argmin transfer is reported separately,
    since it can fail at the threshold weight itself).
    """
    if rspec is None:
        rspec = default_residual_spec(problem)
    notes = []

    fs = minimize_feasible(problem, budget, seed)
    if not fs.ok:
        raise InfeasibleProblemError(
            f"no feasible point found for {problem.name!r} (status {fs.status})")
    fstar = fs.best_value

    def pen(x):
        try:
            return penalized_eval(problem, pspec, rspec, x)
        except EvalError:
            return math.inf

    pr = minimize_unconstrained(pen, problem.domain, budget, seed)
    cst = estimate_cstar(problem, rspec, fstar, budget, seed, pspec=pspec)

    if pr.status == "unbounded":
        return Certificate(STATUS_UNBOUNDED, fstar, pr.best_value, True,
                           cst.value, cst.unbounded, pr.best_point, math.nan,
                           None, problem.domain, pspec, problem.name, tuple(notes))
    if pr.status == "infeasible":
        return Certificate(STATUS_INCONCLUSIVE, fstar, math.inf, False,
                           cst.value, cst.unbounded, None, math.nan, None,
                           problem.domain, pspec, problem.name,
                           ("penalized objective is +inf on every start",))

    ratio_counter = (cst.status == "finite" and cst.value > pspec.c * (1.0 + 1e-3)) \
        or (cst.unbounded and pspec.c < _RATIO_BLOWUP / 2.0)
    value_counter = pr.best_value < fstar - tol
    if ratio_counter or value_counter:
        if cst.witness is not None and (cst.unbounded or not value_counter):
            witness = cst.witness
            wr = cst.value
        else:
            witness = pr.best_point
            fn, _ = _ratio_fn(problem, pspec, rspec, fstar)
            wr = fn(np.asarray(witness))
            if not math.isfinite(wr):
                wr = cst.value
        return Certificate(STATUS_COUNTEREXAMPLE, fstar, pr.best_value, False,
                           cst.value, cst.unbounded, witness, float(wr), None,
                           problem.domain, pspec, problem.name, tuple(notes))

    if abs(pr.best_value - fstar) <= tol:
        res_f = residual_field(problem, rspec)
        f_fn = safe_fn(problem.objective)
        bp = np.asarray(pr.best_point)
        transfer = bool(res_f.fn(bp) <= 1e-6 and abs(f_fn(bp) - fstar) <= 1e-4)
        if not transfer:
            notes.append("penalized minimizer is not feasible: value exactness "
                         "holds but argmin transfer fails at this weight")
        return Certificate(STATUS_CERTIFIED, fstar, pr.best_value, False,
                           cst.value, cst.unbounded, fs.best_point, math.nan,
                           transfer, problem.domain, pspec, problem.name,
                           tuple(notes))

    notes.append("penalized and constrained infima differ beyond tolerance "
                 "but no ratio witness was refined")
    return Certificate(STATUS_INCONCLUSIVE, fstar, pr.best_value, False,
                       cst.value, cst.unbounded, pr.best_point, math.nan, None,
                       problem.domain, pspec, problem.name, tuple(notes))


# ---------------------------------------------------------------------------
# perturbed value function scan

@dataclass(frozen=True)
class CalmnessScan:
    u_grid: tuple          # tuple of m-vectors
    values: tuple          # float or None (perturbed problem infeasible)
    v0: float
    modulus_estimate: float
    diverging: bool


def default_u_grid(m):
    grid = [tuple(0.0 for _ in range(m))]
    for axis in range(m):
        for sign in (1.0, -1.0):
            for k in range(0, 7):
                u = [0.0] * m
                u[axis] = sign * 10.0 ** (-k)
                grid.append(tuple(u))
    return tuple(grid)


def scan_value_function(problem, u_grid=None, budget=Budget(), seed=0):
    """V(u) over a perturbation grid, with a calmness-modulus estimate.

    Each grid point translates the cone factorwise and re-runs the
    constrained minimization.  ``diverging`` is set when some straight-line
    branch of the grid shows (V(0) - V(u)) / |u| growing monotonically
    beyond 1e3 as the perturbation shrinks: the one-sided slope of V at 0
    is then unbounded below and no finite penalty weight can be calm.
    """
    if not isinstance(problem.feasibility, ConeForm):
        raise ValueError("the value-function scan needs a cone-form problem")
    m = problem.feasibility.cone.m
    if u_grid is None:
        u_grid = default_u_grid(m)
    u_grid = tuple(tuple(float(v) for v in u) for u in u_grid)
    if all(any(v != 0.0 for v in u) for u in u_grid):
        u_grid = (tuple(0.0 for _ in range(m)),) + u_grid

    values = []
    for u in u_grid:
        cone_u = problem.feasibility.cone.translate(np.asarray(u))
        perturbed = Problem(problem.name, problem.n, problem.objective,
                            ConeForm(problem.feasibility.g, cone_u), problem.domain)
        r = minimize_feasible(perturbed, budget, seed)
        values.append(r.best_value if r.ok else None)

    v0 = None
    for u, v in zip(u_grid, values):
        if all(c == 0.0 for c in u):
            v0 = v
            break
    if v0 is None:
        raise InfeasibleProblemError("unperturbed problem is infeasible")

    modulus = -math.inf
    branches = {}
    for u, v in zip(u_grid, values):
        nrm = math.sqrt(sum(c * c for c in u))
        if nrm == 0.0 or v is None:
            continue
        ratio = (v0 - v) / nrm
        modulus = max(modulus, ratio)
        d = tuple(round(c / nrm, 9) for c in u)
        branches.setdefault(d, []).append((nrm, ratio))

    diverging = False
    for pts in branches.values():
        pts.sort(key=lambda t: -t[0])  # shrinking |u|
        if len(pts) < 3:
            continue
        ratios = [r for _, r in pts]
        monotone = all(ratios[i + 1] >= ratios[i] - 1e-9 * max(1.0, abs(ratios[i]))
                       for i in range(len(ratios) - 1))
        if monotone and ratios[-1] > 1e3:
            diverging = True
            break

    return CalmnessScan(u_grid, tuple(values), float(v0),
                        float(modulus) if modulus > -math.inf else math.nan,
                        diverging)


# ---------------------------------------------------------------------------
# shell searches shared by the sequence and distance probes

def _sphere_points(n, R, rng, count):
    if n == 1:
        return [np.array([R]), np.array([-R])]
    pts = []
    dirs = _directions(n)[: 2 * n]
    for d in dirs:
        pts.append(R * d)
    for _ in range(count):
        d = rng.standard_normal(n)
        nrm = float(np.linalg.norm(d))
        if nrm > 0:
            pts.append(R * d / nrm)
    return pts


def _sphere_search(score, n, R, seed_tag, sweeps, starts=6):
    """Minimize a score over the sphere of radius R (renormalized moves)."""
    rng = _rng(*seed_tag)
    cands = _sphere_points(n, R, rng, starts)
    if n == 1:
        vals = [(score(p), p) for p in cands]
        vals = [(v, p) for v, p in vals if v < math.inf]
        if not vals:
            return None, math.inf
        v, p = min(vals, key=lambda t: t[0])
        return p, v
    dirs = _directions(n)
    best_x, best_v = None, math.inf
    for x0 in cands:
        x = x0.copy()
        v = score(x)
        if not (v < math.inf):
            continue
        steps = np.full(len(dirs), R / 4.0)
        for _ in range(sweeps):
            improved = False
            for d in range(len(dirs)):
                cand = x + steps[d] * dirs[d]
                nrm = float(np.linalg.norm(cand))
                if nrm == 0.0:
                    steps[d] *= 0.5
                    continue
                cand = cand * (R / nrm)
                w = score(cand)
                if w < v:
                    x, v = cand, w
                    steps[d] *= 2.0
                    improved = True
                else:
                    steps[d] *= 0.5
            if not improved and np.all(steps < 1e-12 * R):
                break
        if v < best_v:
            best_x, best_v = x, v
    return best_x, best_v


# ---------------------------------------------------------------------------
# sequence-type probes

@dataclass(frozen=True)
class SequenceVerdict:
    first_type: tuple    # witness path (outward points) or ()
    second_type: tuple
    epsilon_used: float
    bound_used: float
    first_diagnostics: tuple = ()   # (|x|, phi, psi) per shell
    second_diagnostics: tuple = ()
    warnings: tuple = ()

    @property
    def first_found(self):
        return len(self.first_type) > 0

    @property
    def second_found(self):
        return len(self.second_type) > 0


_FIRST_SHELLS = (10.0, 1e2, 1e3, 1e4)
_SECOND_SHELLS = (10.0, 1e2, 1e3, 1e4, 1e5, 1e6, 1e7)
_SECOND_CROSS = 1e6


def probe_sequence_types(phi, psi, domain, budget=Budget(), seed=0,
                         epsilon=None, bound=None,
                         first_shells=_FIRST_SHELLS, second_shells=_SECOND_SHELLS,
                         second_cross=_SECOND_CROSS):
    """Search outward shells for the two kinds of escape sequences.

    First kind: the residual-like ``psi`` decays to zero along unbounded
    points while ``phi`` stays at least ``epsilon`` (found when the shell
    minima of ``psi`` trend to zero below 1e-2 with the ``phi`` floor
    held).  Second kind: ``phi`` blows up past 1e6 while ``psi`` stays
    below ``bound``.  Absence of a witness is a negative verdict on the
    probed shells only.
    """
    phi, psi = _as_field(phi), _as_field(psi)
    warnings = []
    if phi.warns_exp or psi.warns_exp:
        warnings.append(_EXP_WARNING)
    rng = _rng(seed, 21)
    lo, hi = domain.arrays()
    X = lo + (hi - lo) * rng.random((2048, domain.n))
    pv = phi.fn_many(X)
    sv = psi.fn_many(X)
    pv_f = pv[np.isfinite(pv)]
    sv_f = sv[np.isfinite(sv)]
    if (pv_f < -1e-9).any() or (sv_f < -1e-9).any():
        raise ValueError("sequence probes expect nonnegative phi and psi")
    if epsilon is None:
        spread = float(pv_f.max() - pv_f.min()) if pv_f.size else 0.0
        epsilon = 0.1 * spread if spread > 0 else 0.1
    if bound is None:
        bound = 10.0 * float(sv_f.max()) + 1.0 if sv_f.size else 10.0

    n = domain.n
    sweeps = min(budget.iters, 120)

    # first kind: minimize psi with a hard floor on phi
    p_first = 100.0 * (1.0 + (float(np.nanmax(np.where(np.isfinite(sv), sv, 0.0)))
                              if sv_f.size else 1.0) / max(epsilon, 1e-12))
    first_pts, first_diag = [], []
    for si, R in enumerate(first_shells):
        def score(x):
            s = psi.fn(x)
            p = phi.fn(x)
            if not (s < math.inf) or not (p < math.inf):
                return math.inf
            return s + p_first * max(epsilon - p, 0.0)
        x, v = _sphere_search(score, n, R, (seed, 22, si), sweeps)
        if x is None:
            first_pts = []
            break
        first_pts.append(x)
        first_diag.append((float(np.linalg.norm(x)), float(phi.fn(x)), float(psi.fn(x))))

    first_ok = False
    if len(first_pts) == len(first_shells):
        psis = [d[2] for d in first_diag]
        phis = [d[1] for d in first_diag]
        monotone = all(psis[i + 1] <= psis[i] * 1.05 + 1e-12 for i in range(len(psis) - 1))
        first_ok = (monotone and psis[-1] <= 1e-2
                    and all(p >= epsilon * (1.0 - 1e-9) for p in phis)
                    and first_diag[-1][0] >= 100.0 * first_diag[0][0])

    # second kind: maximize phi with psi capped
    p_second = 100.0 * (1.0 + (float(np.nanmax(np.where(np.isfinite(pv), pv, 0.0)))
                               if pv_f.size else 1.0) / max(bound, 1e-12))
    second_pts, second_diag = [], []
    crossed = False
    for si, R in enumerate(second_shells):
        def score(x):
            s = psi.fn(x)
            p = phi.fn(x)
            if not (s < math.inf) or not (p < math.inf):
                return math.inf
            return -p + p_second * max(s - bound, 0.0)
        x, v = _sphere_search(score, n, R, (seed, 23, si), sweeps)
        if x is None:
            continue
        pval, sval = float(phi.fn(x)), float(psi.fn(x))
        if sval <= bound * (1.0 + 1e-9):
            second_pts.append(x)
            second_diag.append((float(np.linalg.norm(x)), pval, sval))
            if pval >= second_cross:
                crossed = True
                break

    second_ok = crossed and len(second_pts) >= 3 \
        and second_diag[-1][0] >= 100.0 * second_diag[0][0]

    return SequenceVerdict(
        tuple(tuple(map(float, p)) for p in first_pts) if first_ok else (),
        tuple(tuple(map(float, p)) for p in second_pts) if second_ok else (),
        float(epsilon), float(bound),
        tuple(first_diag), tuple(second_diag), tuple(warnings))


# ---------------------------------------------------------------------------
# envelope fitting

@dataclass(frozen=True)
class EnvelopeFit:
    samples_zero: tuple   # (t, mu_hat) pairs, ascending t
    samples_inf: tuple
    alpha_hat: float      # nan when fewer than 3 usable grid points
    beta_hat: float
    residual_zero: float
    residual_inf: float
    dropped: tuple        # t values where psi could not attain the shell
    single_exponent_feasible: bool
    single_exponent_grid: tuple
    validate_chat: float
    validate_samples: int
    warnings: tuple = ()

    @property
    def samples(self):
        return self.samples_zero + self.samples_inf


_T_ZERO = tuple(10.0 ** (-k) for k in range(6, 0, -1))   # 1e-6 .. 1e-1
_T_INF = tuple(10.0 ** k for k in range(1, 7))           # 1e1 .. 1e6
_BAND = 1e-2


def _band_max(phi, psi, t, domain, seed_tag, sweeps, rng):
    """max phi over the shell { |psi - t| <= 0.01 t }, or None if unattained."""
    n = domain.n
    roam = domain.escape_scale
    X = (rng.random((4096, n)) * 2.0 - 1.0) * roam
    sv = psi.fn_many(X)
    gapv = np.abs(sv - t)
    order = np.argsort(np.where(np.isfinite(gapv), gapv, np.inf))
    starters = [X[i] for i in order[:6]]
    lo = -roam * np.ones(n)
    hi = roam * np.ones(n)

    entered = []
    for x0 in starters:
        def offband(x):
            s = psi.fn(x)
            return abs(s - t) if s < math.inf else math.inf
        x, v, _ = _pattern_search(offband, x0, offband(x0), lo, hi, sweeps)
        if v <= _BAND * t:
            entered.append(x)
    if not entered:
        return None

    pref = max(abs(phi.fn(x)) for x in entered)
    lam = 1000.0 * (1.0 + pref / max(t, 1e-300)) if math.isfinite(pref) else 1e9

    def score(x):
        s = psi.fn(x)
        p = phi.fn(x)
        if not (s < math.inf) or not (p < math.inf):
            return math.inf
        return -p + lam * max(abs(s - t) - 0.5 * _BAND * t, 0.0)

    best = None
    for x0 in entered:
        x, v, _ = _pattern_search(score, x0, score(x0), lo, hi, sweeps)
        s = psi.fn(x)
        if abs(s - t) <= _BAND * t:
            p = phi.fn(x)
            if best is None or p > best:
                best = p
    return best


def _ols_loglog(pairs):
    t = np.log10([p[0] for p in pairs])
    m = np.log10([max(p[1], 1e-300) for p in pairs])
    A = np.vstack([t, np.ones_like(t)]).T
    sol, res, _, _ = np.linalg.lstsq(A, m, rcond=None)
    fit = A @ sol
    rms = float(np.sqrt(np.mean((m - fit) ** 2)))
    return float(sol[0]), rms


def fit_envelope(phi, psi, t_grid_zero=_T_ZERO, t_grid_inf=_T_INF,
                 budget=Budget(), seed=0, domain=None):
    """Fit growth exponents of mu(t) = max phi on the level band psi ~ t.

    The slope of log mu against log t on the shrinking grid estimates the
    small-residual exponent, the growing grid the large-residual one.  A
    grid point whose band is never entered is dropped and recorded.  The
    fitted pair is validated by sampling: ``validate_chat`` is the largest
    ratio phi / (psi^alpha + psi^beta) seen on a fresh ball sample.
    """
    if domain is None:
        raise ValueError("fit_envelope needs the search domain")
    phi, psi = _as_field(phi), _as_field(psi)
    warnings = []
    if phi.warns_exp or psi.warns_exp:
        warnings.append(_EXP_WARNING)
    sweeps = min(budget.iters, 160)

    mu_zero, mu_inf, dropped = [], [], []
    for gi, (grid, sink) in enumerate(((t_grid_zero, mu_zero), (t_grid_inf, mu_inf))):
        for ti, t in enumerate(sorted(grid)):
            rng = _rng(seed, 31, gi, ti)
            mu = _band_max(phi, psi, float(t), domain, (seed, 32, gi, ti), sweeps, rng)
            if mu is None:
                dropped.append(float(t))
            else:
                sink.append((float(t), float(mu)))

    alpha_hat = beta_hat = math.nan
    res_zero = res_inf = math.nan
    if len(mu_zero) >= 3:
        alpha_hat, res_zero = _ols_loglog(mu_zero)
    if len(mu_inf) >= 3:
        beta_hat, res_inf = _ols_loglog(mu_inf)

    # single-exponent feasibility on the tested alpha grid: the ratio
    # mu / t^a must stay bounded at both ends for some tested a
    a_grid = tuple(round(0.1 * k, 1) for k in range(1, 11))
    feasible = False
    if len(mu_zero) >= 2 and len(mu_inf) >= 2:
        for a in a_grid:
            r0 = [m / (t ** a) for t, m in mu_zero]
            ri = [m / (t ** a) for t, m in mu_inf]
            bad_zero = r0[0] > 10.0 * max(r0[-1], 1e-300)
            bad_inf = ri[-1] > 10.0 * max(ri[0], 1e-300)
            if not bad_zero and not bad_inf:
                feasible = True
                break

    chat = math.nan
    n_val = 0
    if math.isfinite(alpha_hat) and math.isfinite(beta_hat):
        rng = _rng(seed, 33)
        n_val = max(budget.samples, 10)
        radius = min(domain.escape_scale, 1e3)
        X = _ball_samples(radius, domain.n, n_val, rng)
        pv = phi.fn_many(X)
        sv = psi.fn_many(X)
        with np.errstate(all="ignore"):
            denom = sv ** alpha_hat + sv ** beta_hat
            ratio = pv / denom
        ok = np.isfinite(ratio) & (sv > _RATIO_FLOOR)
        chat = float(np.max(ratio[ok])) if ok.any() else math.nan

    return EnvelopeFit(tuple(mu_zero), tuple(mu_inf), alpha_hat, beta_hat,
                       res_zero, res_inf, tuple(dropped), feasible, a_grid,
                       chat, n_val, tuple(warnings))


# ---------------------------------------------------------------------------
# distance conditions

@dataclass(frozen=True)
class DistanceConditionReport:
    status: str                      # "ok" | "inconclusive"
    c1_holds_on_domain: bool
    c2_variant_holds: bool
    c1_witness: tuple
    c2_witness: tuple
    sample_size: int
    delta_used: float
    bound_used: float
    warnings: tuple = ()


def _harvest_feasible(res_fn, domain, budget, seed, out_to=None):
    """Feasible points from multistart residual minimization, box + shells.

    ``out_to`` extends the harvested shells beyond the escape range so that
    unbounded feasible sets are represented wherever outward probes will
    later measure distances against the sample.
    """
    lo, hi = domain.arrays()
    n = domain.n
    pts = []
    rng = _rng(seed, 41)
    seeds = [(lo + hi) / 2.0] + list(lo + (hi - lo) * rng.random((16, n)))
    r_box = float(np.max(np.abs(np.stack([lo, hi]))))
    r_out = max(domain.escape_scale, out_to or 0.0)
    if r_out > r_box * 1.0001:
        for R in np.geomspace(r_box, r_out, 16):
            for d in _sphere_points(n, R, rng, 2):
                seeds.append(d)
    sweeps = min(budget.iters, 80)
    for p in seeds:
        v = res_fn(p)
        if not (v < math.inf):
            continue
        span = max(1.0, float(np.max(np.abs(p))))
        x, v, _ = _pattern_search(res_fn, p, v, p - 4 * span, p + 4 * span, sweeps)
        x = _snap_to_set(res_fn, x)
        if res_fn(x) <= 1e-8:
            pts.append(x)
    # dedupe on a coarse grid
    out, seen = [], set()
    for x in pts:
        key = tuple(np.round(x, 6))
        if key not in seen:
            seen.add(key)
            out.append(x)
    return out


def probe_distance_conditions(problem, rspec=None, budget=Budget(), seed=0,
                              delta=1.0, dist_cross=1e3):
    """Hunt for paths breaking the residual/distance couplings.

    A first-kind search with phi = estimated distance to S looks for
    vanishing residual at points that stay ``delta`` away from S; a
    second-kind search looks for unbounded distance under a bounded
    residual.  The distance estimate is the minimum over a harvested
    feasible sample, which is grown near every probed shell so that
    unbounded feasible sets are represented out where the probes run.
    """
    if rspec is None:
        rspec = default_residual_spec(problem)
    res_field = residual_field(problem, rspec)
    probe_shells = _SECOND_SHELLS[:5]
    sample = _harvest_feasible(res_field.fn, problem.domain, budget, seed,
                               out_to=2.0 * max(probe_shells))
    if not sample:
        return DistanceConditionReport("inconclusive", False, False, (), (),
                                       0, delta, math.nan)
    S = np.array(sample)

    def dist_fn(x):
        return float(np.min(np.linalg.norm(S - np.asarray(x), axis=1)))

    def dist_many(X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.min(np.linalg.norm(X[:, None, :] - S[None, :, :], axis=2), axis=1)

    dist_field = Field(dist_fn, dist_many, "dist-to-sample")
    verdict = probe_sequence_types(dist_field, res_field, problem.domain,
                                   budget, seed, epsilon=delta, bound=None,
                                   second_shells=probe_shells,
                                   second_cross=dist_cross)

    # re-validate witnesses with a local pull-back: a point that can be
    # repaired onto S nearby is not actually far from S, whatever the
    # sample-based estimate said
    c1_witness = ()
    if verdict.first_found:
        term = np.asarray(verdict.first_type[-1])
        fixed = _repair(res_field.fn, term, travel=2.0 * delta, sweeps=80)
        true_far = fixed is None or float(np.linalg.norm(fixed - term)) >= 0.9 * delta
        if true_far:
            c1_witness = verdict.first_type

    c2_witness = ()
    if verdict.second_found:
        term = np.asarray(verdict.second_type[-1])
        fixed = _repair(res_field.fn, term, travel=dist_cross, sweeps=80)
        true_far = fixed is None or float(np.linalg.norm(fixed - term)) >= 0.9 * dist_cross
        if true_far:
            c2_witness = verdict.second_type

    return DistanceConditionReport(
        "ok", len(c1_witness) == 0, len(c2_witness) == 0,
        tuple(c1_witness), tuple(c2_witness), len(sample), delta,
        float(verdict.bound_used), verdict.warnings)
