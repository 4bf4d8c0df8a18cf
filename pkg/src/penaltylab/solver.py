"""Multistart derivative-free minimization of extended-real objectives.

The local engine is a compass/pattern search with one adaptive step size
per direction, so narrow curved valleys (one coordinate shrinking while
another grows) are tracked by expanding the good direction and shrinking
the bad one.  Objectives may return ``+inf`` anywhere; such points are
simply never accepted, which is what makes indicator-style barriers work
without gradients.

Starts are drawn in Latin-hypercube batches of fixed size.  Batches, and
the probe chains hanging off each batch, depend only on ``(seed, batch
index)``, so enlarging the budget adds work items without perturbing the
existing ones: results can only improve when the budget grows, and the
final merge (min by value, ties to the lowest start index) is order
independent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cones import ConeForm
from .expr import EvalError, evaluate
from .penalty import ResidualSpec, residual_eval

__all__ = [
    "Budget", "SearchDomain", "MinimizeResult",
    "minimize_unconstrained", "minimize_feasible", "safe_fn",
]

_BATCH = 8
_UNBOUNDED_THRESHOLD = -1e6
_FEAS_TOL = 1e-8          # residual level treated as "on the feasible set"
_FEAS_GIVEUP = 1e-4       # above this after phase 1 the problem is infeasible


@dataclass(frozen=True)
class Budget:
    """Work knobs: multistart count, pattern sweeps per start, bulk samples."""

    starts: int = 16
    iters: int = 260
    samples: int = 100_000

    def __post_init__(self):
        if self.starts < 1 or self.iters < 1 or self.samples < 1:
            raise ValueError("budget fields must be positive")


@dataclass(frozen=True)
class SearchDomain:
    """Box searched by multistart plus the escape range for ray probes."""

    lo: tuple
    hi: tuple
    escape_scale: float = 1e3

    def __post_init__(self):
        if len(self.lo) != len(self.hi) or len(self.lo) == 0:
            raise ValueError("box bounds must be nonempty and of equal length")
        if any(a > b for a, b in zip(self.lo, self.hi)):
            raise ValueError("box is empty")
        half = max(abs(float(v)) for v in tuple(self.lo) + tuple(self.hi))
        if self.escape_scale < half:
            raise ValueError("escape_scale must cover the box")

    @property
    def n(self):
        return len(self.lo)

    def arrays(self):
        return np.asarray(self.lo, dtype=float), np.asarray(self.hi, dtype=float)

    @staticmethod
    def box(lo, hi, escape_scale=1e3):
        return SearchDomain(tuple(float(v) for v in lo),
                            tuple(float(v) for v in hi), float(escape_scale))


@dataclass(frozen=True)
class MinimizeResult:
    status: str  # "ok" | "unbounded" | "infeasible"
    best_value: float
    best_point: tuple
    starts_used: int
    seed: int

    @property
    def ok(self):
        return self.status == "ok"


def safe_fn(e):
    """Wrap an Expression as a float-valued callable; errors become +inf."""
    def fn(x):
        try:
            return evaluate(e, x)
        except EvalError:
            return math.inf
    return fn


def _rng(seed, *tags):
    return np.random.default_rng(np.random.SeedSequence([int(seed) & 0x7FFFFFFF, *tags]))


def _lhs_batch(rng, lo, hi, count):
    n = len(lo)
    pts = np.empty((count, n))
    for j in range(n):
        perm = rng.permutation(count)
        pts[:, j] = lo[j] + (hi[j] - lo[j]) * (perm + rng.random(count)) / count
    return pts


_DIR_CACHE = {}


def _directions(n):
    """Coordinate moves plus pairwise diagonals (capped for larger n)."""
    cached = _DIR_CACHE.get(n)
    if cached is not None:
        return cached
    dirs = []
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        dirs.append(e.copy())
        dirs.append(-e)
    if n <= 8:
        s = 1.0 / math.sqrt(2.0)
        for i in range(n):
            for j in range(i + 1, n):
                for si, sj in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
                    v = np.zeros(n)
                    v[i], v[j] = si * s, sj * s
                    dirs.append(v)
    arr = np.array(dirs)
    arr.setflags(write=False)
    _DIR_CACHE[n] = arr
    return arr


def _pattern_search(fn, x0, v0, lo, hi, sweeps, *, threshold=None, accept=None,
                    min_rel_step=1e-13, record=None, step0=None):
    """Sequential pattern search with per-direction adaptive steps.

    ``accept(x)`` may veto candidate points (feasibility filters).  When
    ``threshold`` is set and a candidate value crosses it the search stops
    and reports that point (unboundedness witness).  Returns
    ``(x, value, crossed)``.
    """
    n = len(x0)
    dirs = _directions(n)
    if step0 is None:
        step0 = max(1e-8, float(np.max(hi - lo)) / 8.0)
    steps = np.full(len(dirs), step0)
    x = np.clip(np.asarray(x0, dtype=float), lo, hi)
    best = v0
    for _ in range(sweeps):
        improved = False
        for d in range(len(dirs)):
            cand = np.clip(x + steps[d] * dirs[d], lo, hi)
            if np.array_equal(cand, x):
                steps[d] *= 0.5
                continue
            if accept is not None and not accept(cand):
                steps[d] *= 0.5
                continue
            v = fn(cand)
            if threshold is not None and v <= threshold:
                return cand, v, True
            if v < best:
                x, best = cand, v
                steps[d] *= 2.0
                improved = True
                if record is not None:
                    record(cand, v)
            else:
                steps[d] *= 0.5
        scale = max(1.0, float(np.max(np.abs(x))))
        if not improved and np.all(steps < min_rel_step * scale):
            break
    return x, best, False


def _ray_probes(fn, origin, escape, rng, *, threshold, n_random=4):
    """Geometric ray samples from ``origin`` out to the escape range."""
    n = len(origin)
    dirs = list(_directions(n)[: 2 * n])  # +-e_i
    for _ in range(n_random):
        d = rng.standard_normal(n)
        nrm = float(np.linalg.norm(d))
        if nrm > 0:
            dirs.append(d / nrm)
    lo_mag = max(1.0, float(np.max(np.abs(origin))))
    mags = np.geomspace(lo_mag, escape, 14)
    best_v, best_x, crossed = math.inf, None, None
    for d in dirs:
        for t in mags:
            cand = np.clip(origin + t * d, -escape, escape)
            v = fn(cand)
            if threshold is not None and v <= threshold:
                return v, cand, cand
            if v < best_v:
                best_v, best_x = v, cand
    return best_v, best_x, crossed


def _merge(cands):
    """Min by value then by insertion order (lowest start index wins)."""
    best = None
    for idx, (v, x) in enumerate(cands):
        if x is None or not (v < math.inf):
            continue
        if best is None or v < best[0]:
            best = (v, x, idx)
    return best


def minimize_unconstrained(objective, domain, budget=Budget(), seed=0, *,
                           threshold=_UNBOUNDED_THRESHOLD):
    """Best value of ``objective`` over the box plus escape-range probes.

    ``objective`` is a callable (or Expression) returning extended reals.
    Any probe or refinement value at or below ``threshold`` short-circuits
    into an ``unbounded`` result with the witness point.  Returns
    ``infeasible`` when every start evaluates to +inf.
    """
    from .expr import Expression
    if isinstance(objective, Expression):
        objective = safe_fn(objective)
    lo, hi = domain.arrays()
    escape = domain.escape_scale
    elo, ehi = -abs(escape) * np.ones(domain.n), abs(escape) * np.ones(domain.n)

    n_batches = max(1, math.ceil(budget.starts / _BATCH))
    cands = []
    batch_bests = []
    center = (lo + hi) / 2.0
    vc = objective(center)
    cands.append((vc, center))

    for b in range(n_batches):
        rng = _rng(seed, 1, b)
        pts = _lhs_batch(rng, lo, hi, _BATCH)
        local_best = None
        for p in pts:
            v = objective(p)
            if not (v < math.inf):
                continue
            x, v, crossed = _pattern_search(objective, p, v, lo, hi, budget.iters,
                                            threshold=threshold)
            if crossed:
                return MinimizeResult("unbounded", float(v), tuple(map(float, x)),
                                      budget.starts, seed)
            cands.append((v, x))
            if local_best is None or v < local_best[0]:
                local_best = (v, x)
        if local_best is not None:
            batch_bests.append((b, local_best[1], local_best[0]))

    if not any(v < math.inf for v, _ in cands):
        return MinimizeResult("infeasible", math.inf, None, budget.starts, seed)

    # escape chains: per-batch incumbents plus the box center, two rounds of
    # ray probing and refinement each, every chain independent of the others
    origins = [(0, center)] + [(b + 1, x) for b, x, _ in batch_bests]
    for tag, origin in origins:
        pt = np.asarray(origin, dtype=float)
        for rnd in range(2):
            rng = _rng(seed, 2, tag, rnd)
            v, x, crossed = _ray_probes(objective, pt, escape, rng, threshold=threshold)
            if crossed is not None:
                return MinimizeResult("unbounded", float(v), tuple(map(float, x)),
                                      budget.starts, seed)
            if x is None:
                break
            base_v = objective(x)
            x, v, crossed = _pattern_search(objective, x, base_v, elo, ehi,
                                            budget.iters, threshold=threshold,
                                            step0=max(1.0, 0.25 * float(np.max(np.abs(x)))))
            if crossed:
                return MinimizeResult("unbounded", float(v), tuple(map(float, x)),
                                      budget.starts, seed)
            cands.append((v, x))
            pt = x

    picked = _merge(cands)
    v = objective(picked[1])
    return MinimizeResult("ok", float(v), tuple(map(float, picked[1])),
                          budget.starts, seed)


# ---------------------------------------------------------------------------
# feasible minimization

def _repair(res_fn, x, travel, sweeps=8):
    """Pull a trial point back toward the feasible set, bounded travel.

    Cheap coordinate-only descent on the residual; gives up quickly so the
    surrounding search is not dominated by hopeless pull-backs.
    """
    n = len(x)
    v = res_fn(x)
    if not (v < math.inf):
        return None
    steps = np.full(n, travel / 2.0)
    y = np.asarray(x, dtype=float).copy()
    lo, hi = x - travel, x + travel
    for _ in range(sweeps):
        if v <= _FEAS_TOL:
            return y
        for i in range(n):
            for s in (steps[i], -steps[i]):
                cand = np.clip(y.copy(), lo, hi)
                cand[i] = min(max(y[i] + s, lo[i]), hi[i])
                r = res_fn(cand)
                if r < v:
                    y, v = cand, r
                    steps[i] *= 1.6
                    break
            else:
                steps[i] *= 0.5
    return y if v <= _FEAS_TOL else None


def _snap_to_set(res_fn, x, sweeps=60):
    """Drive the residual from ~1e-8 down toward machine zero.

    The descent phases work at the 1e-8 feasibility band, which steep
    objectives can exploit (a residual of 1e-8 paired with an escape-scale
    coordinate moves f by a visible amount).  Reported minimizers are
    therefore polished to the tightest residual reachable locally before
    values are compared.
    """
    x = np.asarray(x, dtype=float).copy()
    v = res_fn(x)
    if not (v < math.inf) or v == 0.0:
        return x
    n = len(x)
    steps = np.full(n, max(4.0 * v, 1e-9))
    for _ in range(sweeps):
        if v == 0.0:
            break
        moved = False
        for i in range(n):
            for s in (steps[i], -steps[i]):
                cand = x.copy()
                cand[i] += s
                r = res_fn(cand)
                if r < v:
                    x, v = cand, r
                    steps[i] *= 1.6
                    moved = True
                    break
            else:
                steps[i] *= 0.5
        if not moved and np.all(steps < 1e-17 * np.maximum(1.0, np.abs(x))):
            break
    return x


def _feasible_descent(f_fn, res_fn, x0, roam_lo, roam_hi, sweeps):
    """Pattern search on f restricted to residual <= tol, with repair.

    Candidate moves that step off the feasible set are repaired by a short
    residual minimization around the trial point; the repaired point is
    accepted only when it still improves f.
    """
    n = len(x0)
    dirs = _directions(n)
    steps = np.full(len(dirs), max(1e-8, float(np.max(roam_hi - roam_lo)) / 16.0))
    x = np.asarray(x0, dtype=float)
    best = f_fn(x)
    for _ in range(sweeps):
        improved = False
        for d in range(len(dirs)):
            cand = np.clip(x + steps[d] * dirs[d], roam_lo, roam_hi)
            if np.array_equal(cand, x):
                steps[d] *= 0.5
                continue
            r = res_fn(cand)
            if r > _FEAS_TOL:
                # pull-backs are only worth their cost for sizeable moves that
                # land close to the set; fine-scale descent must come from
                # moves that hold the residual on their own
                if r > 4.0 * steps[d] or steps[d] < 1e-5 * max(1.0, float(np.max(np.abs(x)))):
                    steps[d] *= 0.5
                    continue
                fixed = _repair(res_fn, cand, 2.0 * steps[d])
                if fixed is None:
                    steps[d] *= 0.5
                    continue
                cand = np.clip(fixed, roam_lo, roam_hi)
                if res_fn(cand) > _FEAS_TOL:
                    steps[d] *= 0.5
                    continue
            v = f_fn(cand)
            if v < best:
                x, best = cand, v
                steps[d] *= 2.0
                improved = True
            else:
                steps[d] *= 0.5
        scale = max(1.0, float(np.max(np.abs(x))))
        if not improved and np.all(steps < 1e-13 * scale):
            break
    return x, best


def minimize_feasible(problem, budget=Budget(), seed=0, rspec=None):
    """Estimate ``inf_S f`` over the searched domain.

    Phase 1 drives the residual below 1e-8 from many starts; phase 2 runs
    a feasibility-filtered descent on f from each near-feasible point;
    phase 3 fires feasible ray probes toward the escape range (descent
    directions that keep the residual at zero, e.g. along an unbounded
    feasible manifold) and refines.  Infeasible when the residual cannot
    be driven below 1e-4 anywhere in the box.
    """
    if rspec is None:
        rspec = ResidualSpec("dist") if isinstance(problem.feasibility, ConeForm) \
            else ResidualSpec("custom", problem.feasibility.psi)

    def res_fn(x):
        try:
            return residual_eval(rspec, problem, x)
        except EvalError:
            return math.inf

    f_fn = safe_fn(problem.objective)
    domain = problem.domain
    lo, hi = domain.arrays()
    escape = domain.escape_scale
    elo, ehi = -abs(escape) * np.ones(domain.n), abs(escape) * np.ones(domain.n)

    n_batches = max(1, math.ceil(budget.starts / _BATCH))
    pool = []
    best_res = math.inf
    center = (lo + hi) / 2.0
    seeds_pts = [(0, center)]
    for b in range(n_batches):
        rng = _rng(seed, 3, b)
        for i, p in enumerate(_lhs_batch(rng, lo, hi, _BATCH)):
            seeds_pts.append((b + 1, p))

    for tag, p in seeds_pts:
        v = res_fn(p)
        if not (v < math.inf):
            continue
        x, v, _ = _pattern_search(res_fn, p, v, lo, hi, budget.iters)
        best_res = min(best_res, v)
        if v <= _FEAS_TOL:
            pool.append((tag, x))

    if not pool:
        if best_res > _FEAS_GIVEUP:
            return MinimizeResult("infeasible", math.inf, None, budget.starts, seed)
        # thin band between the two tolerances: descend from the best we have
        pool = [(0, min(seeds_pts, key=lambda tp: res_fn(tp[1]))[1])]

    cands = []
    chain_heads = []
    for tag, x0 in pool[:6]:
        x, v = _feasible_descent(f_fn, res_fn, x0, lo, hi, budget.iters)
        cands.append((v, x))
        chain_heads.append((tag, x))

    # feasible escape chains, one per phase-2 result, independent of each other
    for tag, head in chain_heads:
        pt = np.asarray(head, dtype=float)
        for rnd in range(2):
            rng = _rng(seed, 4, tag, rnd)
            n = domain.n
            dirs = list(_directions(n)[: 2 * n])
            for _ in range(4):
                d = rng.standard_normal(n)
                nrm = float(np.linalg.norm(d))
                if nrm > 0:
                    dirs.append(d / nrm)
            lo_mag = max(1.0, float(np.max(np.abs(pt))))
            probe_best = None
            for d in dirs:
                for t in np.geomspace(lo_mag, escape, 14):
                    cand = np.clip(pt + t * d, elo, ehi)
                    if res_fn(cand) > _FEAS_TOL:
                        continue
                    v = f_fn(cand)
                    if probe_best is None or v < probe_best[0]:
                        probe_best = (v, cand)
            if probe_best is None:
                break
            x, v = _feasible_descent(f_fn, res_fn, probe_best[1], elo, ehi, budget.iters)
            cands.append((v, x))
            pt = x

    polished = []
    for v, x in cands:
        y = _snap_to_set(res_fn, x)
        if res_fn(y) <= _FEAS_TOL:
            polished.append((f_fn(y), y))
        elif res_fn(x) <= _FEAS_TOL:
            polished.append((v, x))
    picked = _merge(polished)
    if picked is None:
        return MinimizeResult("infeasible", math.inf, None, budget.starts, seed)
    v = f_fn(picked[1])
    return MinimizeResult("ok", float(v), tuple(map(float, picked[1])),
                          budget.starts, seed)
