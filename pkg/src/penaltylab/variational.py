"""Sampled-subgradient regularity probes.

The probes approximate subdifferentials by finite-difference gradient
clouds and normal cones by the closed-form ray structure of the factor
product.  At points where the constraint value is outside the target set,
normal directions are taken at its projection (augmented with the
canonical direction from the projection to the value itself); this
interpretation is stamped into every report's ``notes``.

All quantities here are one-sided: the mixing-norm estimate is an upper
bound on the true infimum (more cloud samples, a finer mixing grid or a
finer direction grid can only lower it), and an absent blow-up witness is
a statement about the probed shells only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cones import (ConeForm, dist_to_cone, g_values, normal_cone_directions,
                    project_to_cone)
from .expr import EvalError, StencilError, evaluate, sample_subgradients
from .solver import Budget, minimize_feasible
from .certify import InfeasibleProblemError, _sphere_search

__all__ = [
    "InfeasiblePointError", "NuProbe", "MFCQReport", "KInfinityReport", "PathFamily",
    "nu_estimate", "mfcq_check", "k_infinity_probe",
    "NORMAL_DIRECTION_NOTE",
]

NORMAL_DIRECTION_NOTE = (
    "normal directions at infeasible points are taken at the projection of "
    "the constraint value onto the target set, plus the outward direction "
    "from the projection to the value itself")


class InfeasiblePointError(ValueError):
    """A probe that is only defined on the feasible set got an outside point."""


@dataclass(frozen=True)
class NuProbe:
    x: tuple
    nu_hat: float                 # +inf when no unit normal direction exists
    lam: float
    w: tuple
    u: tuple
    v: tuple
    notes: tuple = (NORMAL_DIRECTION_NOTE,)


@dataclass(frozen=True)
class MFCQReport:
    x: tuple
    min_norm: float
    holds: bool
    threshold: float
    notes: tuple = (NORMAL_DIRECTION_NOTE,)


@dataclass(frozen=True)
class PathFamily:
    """Outward path with one single-parameter expression per coordinate."""

    components: tuple  # tuple[Expression, ...], each over 1 variable

    def point(self, tau):
        return np.array([evaluate(c, [tau]) for c in self.components])


@dataclass(frozen=True)
class KInfinityReport:
    cluster_values: tuple   # (t, terminal diagnostics dict) pairs
    paths: tuple            # tuple of iterate tuples
    c2_verdict: str         # "HoldsOnProbes" | "ViolatedWithWitness"
    witness_t: float
    fstar: float
    notes: tuple = (NORMAL_DIRECTION_NOTE,)


def _require_cone_form(problem):
    if not isinstance(problem.feasibility, ConeForm):
        raise ValueError("regularity probes need a cone-form problem")
    return problem.feasibility


def _scalarized_cloud(form, w, x, radius, count, seed, h):
    """Finite-difference gradients of <w, g> sampled around x."""
    n = len(x)
    rng = np.random.default_rng(np.random.SeedSequence(seed))

    def val(z):
        return float(np.dot(w, g_values(form, z)))

    samples = []
    attempts = 0
    while len(samples) < count and attempts < 10 * count:
        attempts += 1
        d = rng.standard_normal(n)
        nrm = float(np.linalg.norm(d))
        if nrm == 0.0:
            continue
        z = x + (radius * rng.random() ** (1.0 / n) / nrm) * d
        try:
            grad = np.empty(n)
            for i in range(n):
                e = np.zeros(n)
                e[i] = h
                fp, fm = val(z + e), val(z - e)
                if not (math.isfinite(fp) and math.isfinite(fm)):
                    raise StencilError("nonfinite stencil")
                grad[i] = (fp - fm) / (2.0 * h)
            samples.append(grad)
        except (EvalError, StencilError, OverflowError):
            continue
    if not samples:
        return None
    return np.array(samples)


def _lambda_grid(points):
    return np.arange(1, points + 1) / (points + 1.0)


def _min_mix_norm(U, V, lam):
    """min over cloud pairs of |lam u + (1 - lam) v| and its argmin pair."""
    with np.errstate(all="ignore"):
        M = lam * U[:, None, :] + (1.0 - lam) * V[None, :, :]
        nrm = np.linalg.norm(M, axis=2)
    nrm = np.where(np.isnan(nrm), np.inf, nrm)
    i, j = np.unravel_index(np.argmin(nrm), nrm.shape)
    return float(nrm[i, j]), i, j


def _golden_lambda(fn, a, b, iters=40):
    phi = (math.sqrt(5.0) - 1.0) / 2.0
    x1 = b - phi * (b - a)
    x2 = a + phi * (b - a)
    f1, f2 = fn(x1), fn(x2)
    for _ in range(iters):
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - phi * (b - a)
            f1 = fn(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + phi * (b - a)
            f2 = fn(x2)
    return x1 if f1 <= f2 else x2


def nu_estimate(problem, x, cloud_radius=None, cloud_count=32, w_resolution=64,
                lambda_points=63, seed=0, fd_step=None):
    """Upper bound on the mixing norm inf |lam u + (1-lam) v| at ``x``.

    ``u`` ranges over a gradient cloud of the objective, ``v`` over clouds
    of the scalarizations <w, g> for unit normal directions ``w`` at the
    projection of g(x).  The mixing weight runs over a uniform open-interval
    grid refined by golden section (the ends are approached but never
    taken).  An empty direction set gives ``nu_hat = +inf``.
    """
    form = _require_cone_form(problem)
    x = np.asarray(x, dtype=float)
    scale = 1.0 + float(np.max(np.abs(x)))
    if cloud_radius is None:
        cloud_radius = 1e-4 * scale
    if fd_step is None:
        fd_step = 1e-6 * scale

    gx = g_values(form, x)
    if not np.all(np.isfinite(gx)):
        raise EvalError("constraint value is not finite at the probe point")
    proj = project_to_cone(gx, form.cone)
    dist = float(np.linalg.norm(gx - proj))
    W = [w for w in normal_cone_directions(proj, form.cone, resolution=w_resolution)]
    if dist > 1e-12:
        W.append((gx - proj) / dist)
    if not W:
        return NuProbe(tuple(map(float, x)), math.inf, math.nan, (), (), ())

    try:
        U = sample_subgradients(problem.objective, x, cloud_radius, cloud_count,
                                seed, h=fd_step).samples
    except Exception as err:
        raise EvalError(f"objective cloud failed at {tuple(x)}: {err}") from None

    clouds = []
    for wi, w in enumerate(W):
        V = _scalarized_cloud(form, w, x, cloud_radius, cloud_count,
                              seed + 1 + wi, fd_step)
        if V is not None:
            clouds.append((w, V))
    if not clouds:
        return NuProbe(tuple(map(float, x)), math.inf, math.nan, (), (), ())

    grid = _lambda_grid(lambda_points)
    best = None
    for w, V in clouds:
        for lam in grid:
            val, i, j = _min_mix_norm(U, V, lam)
            if best is None or val < best[0]:
                best = (val, lam, w, U[i], V[j], V)
    # refine the mixing weight inside (0, 1) around the grid winner
    _, lam0, w0, u0, v0, V0 = best
    span = grid[1] - grid[0] if len(grid) > 1 else 0.25

    def h_of_lam(lam):
        return _min_mix_norm(U, V0, lam)[0]

    lam_ref = _golden_lambda(h_of_lam, max(1e-12, lam0 - span),
                             min(1.0 - 1e-12, lam0 + span))
    val_ref, i, j = _min_mix_norm(U, V0, lam_ref)
    if val_ref < best[0]:
        best = (val_ref, lam_ref, w0, U[i], V0[j], V0)

    val, lam, w, u, v, _ = best
    return NuProbe(tuple(map(float, x)), float(val), float(lam),
                   tuple(map(float, w)), tuple(map(float, u)), tuple(map(float, v)))


def mfcq_check(problem, x, threshold=1e-3, cloud_radius=None, cloud_count=32,
               w_resolution=64, seed=0):
    """Smallest scalarized-constraint gradient norm over unit normals at x.

    Defined at feasible points only.  The qualification holds when every
    cloud member of every <w, g> stays bounded away from zero: a small
    ``min_norm`` flags a degenerate unit normal direction.
    """
    form = _require_cone_form(problem)
    x = np.asarray(x, dtype=float)
    gx = g_values(form, x)
    if not np.all(np.isfinite(gx)) or dist_to_cone(gx, form.cone) > 1e-6:
        raise InfeasiblePointError(f"point {tuple(x)} is not feasible")
    scale = 1.0 + float(np.max(np.abs(x)))
    if cloud_radius is None:
        cloud_radius = 1e-4 * scale
    W = normal_cone_directions(project_to_cone(gx, form.cone), form.cone,
                               resolution=w_resolution)
    if len(W) == 0:
        # no unit normal direction at all: nothing can violate the condition
        return MFCQReport(tuple(map(float, x)), math.inf, True, threshold)
    min_norm = math.inf
    for wi, w in enumerate(W):
        V = _scalarized_cloud(form, w, x, cloud_radius, cloud_count,
                              seed + 1 + wi, 1e-6 * scale)
        if V is None:
            continue
        min_norm = min(min_norm, float(np.min(np.linalg.norm(V, axis=1))))
    return MFCQReport(tuple(map(float, x)), float(min_norm),
                      bool(min_norm > threshold), threshold)


# ---------------------------------------------------------------------------
# asymptotic cluster values

_K_SHELLS = (10.0, 1e2, 1e3, 1e4)


def _solve_tau_for_radius(family, R, lo=1e-9, hi=1e12):
    """Parameter value where the path reaches sup-norm radius R.

    Path norms need not be monotone in the parameter (a component may
    shrink while another grows), so a geometric scan locates the best
    bracket and a golden search on log tau polishes it.
    """
    def lognrm(tau):
        try:
            p = family.point(tau)
        except EvalError:
            return math.nan
        if not np.all(np.isfinite(p)):
            return math.nan
        v = float(np.max(np.abs(p)))
        return math.log(v) if v > 0 else math.nan

    target = math.log(R)
    taus = np.geomspace(lo, hi, 600)
    vals = np.array([lognrm(t) for t in taus])
    ok = np.isfinite(vals)
    if not ok.any():
        return None
    idx = int(np.argmin(np.where(ok, np.abs(vals - target), np.inf)))
    a = taus[max(0, idx - 1)]
    b = taus[min(len(taus) - 1, idx + 1)]

    def gap(logtau):
        v = lognrm(math.exp(logtau))
        return abs(v - target) if math.isfinite(v) else math.inf

    la, lb = math.log(a), math.log(b)
    phi = (math.sqrt(5.0) - 1.0) / 2.0
    x1 = lb - phi * (lb - la)
    x2 = la + phi * (lb - la)
    f1, f2 = gap(x1), gap(x2)
    for _ in range(80):
        if f1 <= f2:
            lb, x2, f2 = x2, x1, f1
            x1 = lb - phi * (lb - la)
            f1 = gap(x1)
        else:
            la, x1, f1 = x1, x2, f2
            x2 = la + phi * (lb - la)
            f2 = gap(x2)
    best = x1 if f1 <= f2 else x2
    if gap(best) > math.log(1.5):
        return None
    return math.exp(best)


def _shell_min_violation(problem, R, seed_tag, sweeps=80, starts=6):
    """Point on the radius-R sphere with the smallest positive violation."""
    form = problem.feasibility

    def res(x):
        try:
            gv = g_values(form, x)
        except EvalError:
            return math.inf
        if not np.all(np.isfinite(gv)):
            return math.inf
        return dist_to_cone(gv, form.cone)

    x, v = _sphere_search(res, problem.n, R, seed_tag, sweeps, starts=starts)
    return x


def k_infinity_probe(problem, families=(), budget=Budget(), seed=0, fstar=None,
                     shells=_K_SHELLS, margin=0.5):
    """Cluster values of f along outward, asymptotically critical paths.

    Declared path families are followed exactly (one probe point per
    shell); without families, each shell is searched for its smallest
    constraint violation among strictly infeasible points.  A cluster
    value is reported when the terminal iterate passes the diagnostics:
    radius at least 1e3, radius times the mixing-norm estimate at most
    1e-2, violation at most 1e-3, and a stable objective value (within
    1e-2 across the last two shells).  Any reported value at or below
    fstar + 1e-3 violates the asymptotic inclusion and is returned as the
    witness.
    """
    form = _require_cone_form(problem)
    if fstar is None:
        fs = minimize_feasible(problem, budget, seed)
        if not fs.ok:
            raise InfeasibleProblemError("cannot estimate the constrained infimum")
        fstar = fs.best_value

    f_fn = problem.objective
    trails = []
    if families:
        for fam in families:
            pts = []
            for R in shells:
                tau = _solve_tau_for_radius(fam, R)
                if tau is None:
                    continue
                try:
                    p = fam.point(tau)
                except EvalError:
                    continue
                if np.all(np.isfinite(p)):
                    pts.append(np.asarray(p, dtype=float))
            if len(pts) >= 2:
                trails.append(pts)
    else:
        pts = []
        for si, R in enumerate(shells):
            x = _shell_min_violation(problem, R, (seed, 51, si))
            if x is not None:
                pts.append(np.asarray(x, dtype=float))
        if len(pts) >= 2:
            trails.append(pts)

    clusters = []
    paths = []
    for pts in trails:
        # strictly infeasible iterates only: the cluster set ranges over
        # points outside S
        def viol(p):
            try:
                gv = g_values(form, p)
            except EvalError:
                return math.inf
            return dist_to_cone(gv, form.cone) if np.all(np.isfinite(gv)) else math.inf

        pts = [p for p in pts if viol(p) > 1e-12]
        if len(pts) < 2:
            continue
        term, prev = pts[-1], pts[-2]
        try:
            f_term = evaluate(f_fn, term)
            f_prev = evaluate(f_fn, prev)
        except EvalError:
            continue
        if not (math.isfinite(f_term) and math.isfinite(f_prev)):
            continue
        try:
            probe = nu_estimate(problem, term, seed=seed)
        except EvalError:
            continue
        r_term = float(np.linalg.norm(term))
        diag = {
            "norm": r_term,
            "norm_nu": r_term * probe.nu_hat,
            "dist": viol(term),
            "f": float(f_term),
            "f_prev": float(f_prev),
        }
        ok = (r_term >= 1e3
              and diag["norm_nu"] <= 1e-2
              and diag["dist"] <= 1e-3
              and abs(f_term - f_prev) <= 1e-2)
        if ok:
            clusters.append((float(f_term), diag))
            paths.append(tuple(tuple(map(float, p)) for p in pts))

    witness_t = math.nan
    verdict = "HoldsOnProbes"
    for t, diag in clusters:
        if t <= fstar + 1e-3 and (math.isnan(witness_t) or t < witness_t):
            witness_t = t
            verdict = "ViolatedWithWitness"

    return KInfinityReport(tuple(clusters), tuple(paths), verdict,
                           float(witness_t), float(fstar))
