"""Problem container and the line-oriented problem-file format.

A problem file is diff-friendly ``key = value`` text::

    name = diag
    n = 2
    objective = x0 - x1
    constraint.0.expr = x0 - x1
    constraint.0.cone = zero
    box.lo = -10 -10
    box.hi = 10 10
    escape = 1000
    seed = 7
    expect.certify.0.penalty = plain(1.5)
    expect.certify.0.status = CertifiedExactOnDomain

Residual-form feasibility uses a single ``residual = <expr>`` key instead
of the ``constraint.i.*`` pairs.  ``expect.<command>.<index>.<field>``
lines declare self-verification expectations consumed by the corpus
runner; ``kinf.path.<j>.<i>`` lines declare outward path families (each
component an expression in the single parameter ``x0``).  Lines starting
with ``#`` are comments.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .cones import ConeForm, ConeSet, ResidualForm, parse_cone_factor, format_cone_factor
from .expr import Expression, ParseError, parse, to_text
from .solver import SearchDomain

__all__ = ["Problem", "ProblemFormatError", "LoadedProblem",
           "load_problem", "loads_problem", "save_problem", "dumps_problem"]


class ProblemFormatError(ValueError):
    """Malformed problem file; message carries the offending line."""


@dataclass(frozen=True)
class Problem:
    name: str
    n: int
    objective: Expression
    feasibility: object  # ConeForm | ResidualForm
    domain: SearchDomain


@dataclass(frozen=True)
class LoadedProblem:
    problem: Problem
    seed: int = 0
    expectations: dict = field(default_factory=dict)
    kinf_paths: tuple = ()  # tuple[tuple[Expression, ...], ...]
    note: str = ""


def _parse_expr(text, n, key):
    try:
        return parse(text, n)
    except ParseError as err:
        raise ProblemFormatError(f"{key}: {err}") from None


def _parse_floats(value, n, line):
    parts = value.split()
    try:
        vals = [float(p) for p in parts]
    except ValueError:
        raise ProblemFormatError(f"cannot parse numbers in {line!r}") from None
    if len(vals) == 1:
        vals = vals * n
    if len(vals) != n:
        raise ProblemFormatError(f"expected {n} numbers in {line!r}")
    return vals


def loads_problem(text, name_hint=""):
    entries = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ProblemFormatError(f"line {lineno}: missing '=' in {line!r}")
        key, value = line.split("=", 1)
        entries.append((lineno, key.strip(), value.strip()))

    kv = {}
    for lineno, key, value in entries:
        if key in kv:
            raise ProblemFormatError(f"line {lineno}: duplicate key {key!r}")
        kv[key] = value

    try:
        n = int(kv["n"])
    except KeyError:
        raise ProblemFormatError("missing required key 'n'") from None
    except ValueError:
        raise ProblemFormatError(f"n must be an integer, got {kv['n']!r}") from None
    if n < 1:
        raise ProblemFormatError("n must be >= 1")
    name = kv.get("name", name_hint)
    if "objective" not in kv:
        raise ProblemFormatError("missing required key 'objective'")
    objective = _parse_expr(kv["objective"], n, "objective")

    cons = {}
    for key, value in kv.items():
        parts = key.split(".")
        if parts[0] == "constraint":
            if len(parts) != 3 or parts[2] not in ("expr", "cone"):
                raise ProblemFormatError(f"bad constraint key {key!r}")
            idx = int(parts[1])
            cons.setdefault(idx, {})[parts[2]] = value

    if cons and "residual" in kv:
        raise ProblemFormatError("give either constraint.* keys or residual, not both")
    if cons:
        m = len(cons)
        if sorted(cons) != list(range(m)):
            raise ProblemFormatError("constraint indices must be 0..m-1 without gaps")
        g, factors = [], []
        for i in range(m):
            block = cons[i]
            if "expr" not in block or "cone" not in block:
                raise ProblemFormatError(f"constraint.{i} needs both expr and cone")
            g.append(_parse_expr(block["expr"], n, f"constraint.{i}.expr"))
            factors.append(parse_cone_factor(block["cone"]))
        feasibility = ConeForm(tuple(g), ConeSet(tuple(factors)))
    elif "residual" in kv:
        feasibility = ResidualForm(_parse_expr(kv["residual"], n, "residual"))
    else:
        raise ProblemFormatError("missing feasibility: constraint.* keys or residual")

    if "box.lo" not in kv or "box.hi" not in kv:
        raise ProblemFormatError("missing box.lo / box.hi")
    lo = _parse_floats(kv["box.lo"], n, kv["box.lo"])
    hi = _parse_floats(kv["box.hi"], n, kv["box.hi"])
    escape = float(kv.get("escape", 1e3))
    half = max(abs(v) for v in lo + hi)
    escape = max(escape, half)
    domain = SearchDomain.box(lo, hi, escape)

    seed = int(kv.get("seed", 0))
    note = kv.get("note", "")

    expectations = {}
    paths = {}
    for key, value in kv.items():
        parts = key.split(".")
        if parts[0] == "expect":
            if len(parts) < 4:
                raise ProblemFormatError(
                    f"expect keys look like expect.<command>.<index>.<field>: {key!r}")
            command, idx, fieldname = parts[1], parts[2], ".".join(parts[3:])
            try:
                idx = int(idx)
            except ValueError:
                raise ProblemFormatError(f"bad expectation index in {key!r}") from None
            expectations.setdefault(command, {}).setdefault(idx, {})[fieldname] = value
        elif parts[0] == "kinf" and len(parts) == 4 and parts[1] == "path":
            j, i = int(parts[2]), int(parts[3])
            paths.setdefault(j, {})[i] = _parse_expr(value, 1, key)

    kinf_paths = []
    for j in sorted(paths):
        comps = paths[j]
        if sorted(comps) != list(range(n)):
            raise ProblemFormatError(
                f"kinf.path.{j} needs one component per coordinate 0..{n-1}")
        kinf_paths.append(tuple(comps[i] for i in range(n)))

    problem = Problem(name=name, n=n, objective=objective,
                      feasibility=feasibility, domain=domain)
    return LoadedProblem(problem=problem, seed=seed, expectations=expectations,
                         kinf_paths=tuple(kinf_paths), note=note)


def load_problem(path):
    """Read and validate a problem file."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    import os
    hint = os.path.splitext(os.path.basename(path))[0]
    try:
        return loads_problem(text, name_hint=hint)
    except ProblemFormatError as err:
        raise ProblemFormatError(f"{path}: {err}") from None


def _fmt_float(v):
    if v == int(v) and abs(v) <= 1e15:
        return repr(int(v))
    return repr(v)


def dumps_problem(loaded):
    p = loaded.problem
    lines = [f"name = {p.name}", f"n = {p.n}", f"objective = {to_text(p.objective)}"]
    if isinstance(p.feasibility, ConeForm):
        for i, (gi, fi) in enumerate(zip(p.feasibility.g, p.feasibility.cone.factors)):
            lines.append(f"constraint.{i}.expr = {to_text(gi)}")
            lines.append(f"constraint.{i}.cone = {format_cone_factor(fi)}")
    else:
        lines.append(f"residual = {to_text(p.feasibility.psi)}")
    lines.append("box.lo = " + " ".join(_fmt_float(v) for v in p.domain.lo))
    lines.append("box.hi = " + " ".join(_fmt_float(v) for v in p.domain.hi))
    lines.append(f"escape = {_fmt_float(p.domain.escape_scale)}")
    lines.append(f"seed = {loaded.seed}")
    if loaded.note:
        lines.append(f"note = {loaded.note}")
    for j, comps in enumerate(loaded.kinf_paths):
        for i, comp in enumerate(comps):
            lines.append(f"kinf.path.{j}.{i} = {to_text(comp)}")
    for command in sorted(loaded.expectations):
        blocks = loaded.expectations[command]
        for idx in sorted(blocks):
            for fieldname in sorted(blocks[idx]):
                lines.append(
                    f"expect.{command}.{idx}.{fieldname} = {blocks[idx][fieldname]}")
    return "\n".join(lines) + "\n"


def save_problem(path, loaded):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_problem(loaded))
