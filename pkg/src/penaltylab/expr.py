"""Expression trees for extended-real scalar functions on R^n.

Values are plain floats where ``+inf`` is a legal result (a failed guard
behind an indicator, an overflowing ``exp``, ...).  Negative infinity is
never produced: any operation that would yield ``-inf`` raises
:class:`EvalError` instead, and callers that want a barrier semantics map
that error to ``+inf`` themselves.

Grammar (ASCII)::

    variables   x0 .. x{n-1}
    operators   + - * / ^          (^ takes an integer or (p/q) exponent)
    functions   abs(e) pos(e) max(e, ...) min(e, ...) exp(e)
                ind(guard) pw((guard: e), ..., default: e)
    guards      e == 0, e != 0, e <= 0, e < 0, joined with &&

Rational powers ``e^(p/q)`` use the sign-aware real root when ``q`` is odd
and require a nonnegative base otherwise.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ParseError", "EvalError", "StencilError", "SamplingError",
    "Expression", "GradientCloud",
    "parse", "to_text", "evaluate", "eval_many",
    "fd_gradient", "sample_subgradients", "uses_exp",
]

INF = math.inf


class ParseError(ValueError):
    """Malformed expression text; carries the byte offset of the defect."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class EvalError(ArithmeticError):
    """Evaluation cannot produce a value in R union {+inf}."""


class StencilError(EvalError):
    """A finite-difference stencil has no usable finite arm."""


class SamplingError(RuntimeError):
    """Gradient sampling ran out of retry budget before filling the cloud."""


# ---------------------------------------------------------------------------
# nodes

@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    index: int


@dataclass(frozen=True)
class Neg:
    arg: object


@dataclass(frozen=True)
class Add:
    left: object
    right: object


@dataclass(frozen=True)
class Sub:
    left: object
    right: object


@dataclass(frozen=True)
class Mul:
    left: object
    right: object


@dataclass(frozen=True)
class Div:
    left: object
    right: object


@dataclass(frozen=True)
class Pow:
    # exponent num/den is stored as written; normalizing 2/6 to 1/3 would
    # silently change the domain for negative bases
    base: object
    num: int
    den: int


@dataclass(frozen=True)
class Abs:
    arg: object


@dataclass(frozen=True)
class Pos:
    arg: object


@dataclass(frozen=True)
class Exp:
    arg: object


@dataclass(frozen=True)
class Max:
    args: tuple


@dataclass(frozen=True)
class Min:
    args: tuple


@dataclass(frozen=True)
class GuardAtom:
    expr: object
    rel: str  # "==", "!=", "<=", "<"  -- always against zero


@dataclass(frozen=True)
class Guard:
    atoms: tuple


@dataclass(frozen=True)
class Indicator:
    guard: Guard


@dataclass(frozen=True)
class Piecewise:
    branches: tuple  # ((Guard, node), ...)
    default: object


@dataclass(frozen=True)
class Expression:
    """A parsed scalar expression over ``n`` variables."""

    root: object
    n: int

    def __str__(self):
        return to_text(self)


@dataclass(frozen=True, eq=False)
class GradientCloud:
    """Finite-difference gradients sampled in a ball around ``center``."""

    center: tuple
    samples: np.ndarray  # (count, n)
    radius: float
    seed: int


# ---------------------------------------------------------------------------
# tokenizer

_TOKEN_RE = re.compile(
    r"""(?P<ws>\s+)
      | (?P<num>\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)
      | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
      | (?P<op>==|!=|<=|&&|[-+*/^(),:<])
    """,
    re.X,
)


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", pos)
        if m.lastgroup != "ws":
            tokens.append((m.lastgroup, m.group(), pos))
        pos = m.end()
    tokens.append(("eof", "", len(text)))
    return tokens


_FUNCTIONS = {"abs", "pos", "max", "min", "exp", "ind", "pw"}


class _Parser:
    def __init__(self, text, n):
        self.tokens = _tokenize(text)
        self.i = 0
        self.n = n

    def peek(self):
        return self.tokens[self.i]

    def next(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text):
        kind, val, off = self.peek()
        if val != text:
            raise ParseError(f"expected {text!r}, found {val or 'end of input'!r}", off)
        return self.next()

    def fail(self, message):
        _, val, off = self.peek()
        raise ParseError(message, off)

    # expr := term (('+'|'-') term)*
    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.next()[1]
            rhs = self.term()
            node = Add(node, rhs) if op == "+" else Sub(node, rhs)
        return node

    # term := unary (('*'|'/') unary)*
    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/"):
            op = self.next()[1]
            rhs = self.unary()
            node = Mul(node, rhs) if op == "*" else Div(node, rhs)
        return node

    # unary := '-' unary | power     (a literal after unary minus folds)
    def unary(self):
        if self.peek()[1] == "-":
            self.next()
            node = self.unary()
            if isinstance(node, Const):
                return Const(-node.value)
            return Neg(node)
        return self.power()

    # power := atom ('^' exponent)*
    def power(self):
        node = self.atom()
        while self.peek()[1] == "^":
            self.next()
            num, den = self.exponent()
            node = Pow(node, num, den)
        return node

    def exponent(self):
        kind, val, off = self.peek()
        if kind == "num":
            self.next()
            if not re.fullmatch(r"\d+", val):
                raise ParseError("exponent must be an integer or (p/q)", off)
            return int(val), 1
        if val == "(":
            self.next()
            sign = 1
            if self.peek()[1] == "-":
                self.next()
                sign = -1
            kind, val, off = self.next()
            if kind != "num" or not re.fullmatch(r"\d+", val):
                raise ParseError("exponent must be an integer or (p/q)", off)
            num = sign * int(val)
            den = 1
            if self.peek()[1] == "/":
                self.next()
                kind, val, off = self.next()
                if kind != "num" or not re.fullmatch(r"\d+", val):
                    raise ParseError("exponent denominator must be a positive integer", off)
                den = int(val)
                if den == 0:
                    raise ParseError("exponent denominator must be a positive integer", off)
            self.expect(")")
            return num, den
        raise ParseError("exponent must be an integer or (p/q)", off)

    def atom(self):
        kind, val, off = self.peek()
        if kind == "num":
            self.next()
            return Const(float(val))
        if val == "(":
            self.next()
            node = self.expr()
            self.expect(")")
            return node
        if kind == "name":
            m = re.fullmatch(r"x(\d+)", val)
            if m:
                self.next()
                idx = int(m.group(1))
                if idx >= self.n:
                    raise ParseError(f"variable x{idx} out of range for n={self.n}", off)
                return Var(idx)
            if val in _FUNCTIONS:
                self.next()
                return self.call(val)
            raise ParseError(f"unknown function or name {val!r}", off)
        self.fail(f"unexpected token {val or 'end of input'!r}")

    def call(self, name):
        self.expect("(")
        if name in ("abs", "pos", "exp"):
            arg = self.expr()
            self.expect(")")
            return {"abs": Abs, "pos": Pos, "exp": Exp}[name](arg)
        if name in ("max", "min"):
            args = [self.expr()]
            while self.peek()[1] == ",":
                self.next()
                args.append(self.expr())
            self.expect(")")
            return (Max if name == "max" else Min)(tuple(args))
        if name == "ind":
            guard = self.guard()
            self.expect(")")
            return Indicator(guard)
        return self.pw_body()

    def pw_body(self):
        branches = []
        default = None
        while True:
            kind, val, off = self.peek()
            if val == "(":
                self.next()
                guard = self.guard()
                self.expect(":")
                body = self.expr()
                self.expect(")")
                branches.append((guard, body))
            elif kind == "name" and val == "default":
                self.next()
                self.expect(":")
                default = self.expr()
            else:
                self.fail("expected (guard: expr) or default: expr in pw(...)")
            if self.peek()[1] == ",":
                self.next()
                continue
            break
        self.expect(")")
        if default is None:
            self.fail("pw(...) requires a default branch")
        return Piecewise(tuple(branches), default)

    def guard(self):
        atoms = [self.guard_atom()]
        while self.peek()[1] == "&&":
            self.next()
            atoms.append(self.guard_atom())
        return Guard(tuple(atoms))

    def guard_atom(self):
        lhs = self.expr()
        kind, val, off = self.peek()
        if val not in ("==", "!=", "<=", "<"):
            raise ParseError("guard needs a comparison ==, !=, <= or <", off)
        self.next()
        kind, val, off = self.next()
        if kind != "num" or float(val) != 0.0:
            raise ParseError("guards compare against the literal 0", off)
        rel = {"==": "==", "!=": "!=", "<=": "<=", "<": "<"}[self.tokens[self.i - 2][1]]
        return GuardAtom(lhs, rel)


def parse(text, n):
    """Parse ``text`` into an :class:`Expression` over ``n`` variables."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    p = _Parser(text, n)
    root = p.expr()
    kind, val, off = p.peek()
    if kind != "eof":
        raise ParseError(f"trailing input {val!r}", off)
    return Expression(root, n)


# ---------------------------------------------------------------------------
# printing (parse(to_text(e)) is structurally identical to e)

_LVL_ADD, _LVL_MUL, _LVL_NEG, _LVL_POW, _LVL_ATOM = 1, 2, 3, 4, 5


def _fmt_num(v):
    if v == int(v) and abs(v) <= 1e15:
        return repr(int(v))
    return repr(v)


def _paren(text, level, ctx):
    return f"({text})" if level < ctx else text


def _fmt(node, ctx=0):
    if isinstance(node, Const):
        txt = _fmt_num(node.value)
        level = _LVL_ATOM if node.value >= 0 else _LVL_NEG
        return _paren(txt, level, ctx)
    if isinstance(node, Var):
        return f"x{node.index}"
    if isinstance(node, Neg):
        return _paren("-" + _fmt(node.arg, _LVL_POW), _LVL_NEG, ctx)
    if isinstance(node, (Add, Sub)):
        op = " + " if isinstance(node, Add) else " - "
        txt = _fmt(node.left, _LVL_ADD) + op + _fmt(node.right, _LVL_ADD + 1)
        return _paren(txt, _LVL_ADD, ctx)
    if isinstance(node, (Mul, Div)):
        op = " * " if isinstance(node, Mul) else " / "
        txt = _fmt(node.left, _LVL_MUL) + op + _fmt(node.right, _LVL_MUL + 1)
        return _paren(txt, _LVL_MUL, ctx)
    if isinstance(node, Pow):
        if node.den == 1 and node.num >= 0:
            e = f"^{node.num}"
        elif node.den == 1:
            e = f"^({node.num})"
        else:
            e = f"^({node.num}/{node.den})"
        return _paren(_fmt(node.base, _LVL_ATOM) + e, _LVL_POW, ctx)
    if isinstance(node, Abs):
        return f"abs({_fmt(node.arg)})"
    if isinstance(node, Pos):
        return f"pos({_fmt(node.arg)})"
    if isinstance(node, Exp):
        return f"exp({_fmt(node.arg)})"
    if isinstance(node, Max):
        return "max(" + ", ".join(_fmt(a) for a in node.args) + ")"
    if isinstance(node, Min):
        return "min(" + ", ".join(_fmt(a) for a in node.args) + ")"
    if isinstance(node, Indicator):
        return f"ind({_fmt_guard(node.guard)})"
    if isinstance(node, Piecewise):
        parts = [f"({_fmt_guard(g)}: {_fmt(b)})" for g, b in node.branches]
        parts.append(f"default: {_fmt(node.default)}")
        return "pw(" + ", ".join(parts) + ")"
    raise TypeError(f"not an expression node: {node!r}")


def _fmt_guard(guard):
    return " && ".join(f"{_fmt(a.expr)} {a.rel} 0" for a in guard.atoms)


def to_text(e):
    """Canonical text form; re-parsing returns a structurally equal tree."""
    return _fmt(e.root)


# ---------------------------------------------------------------------------
# scalar evaluation

def _chk(v):
    # overflow of a legitimately positive quantity is +inf; -inf and nan
    # have no extended-real meaning here
    if v == -INF:
        raise EvalError("expression produced -inf")
    if v != v:
        raise EvalError("nonfinite arithmetic (nan)")
    return v


def _ev(node, x):
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Var):
        return float(x[node.index])
    if isinstance(node, Neg):
        v = _ev(node.arg, x)
        if v == INF:
            raise EvalError("negation of +inf")
        return -v
    if isinstance(node, Add):
        a = _ev(node.left, x)
        b = _ev(node.right, x)
        if a == INF or b == INF:
            return INF
        return _chk(a + b)
    if isinstance(node, Sub):
        a = _ev(node.left, x)
        b = _ev(node.right, x)
        if b == INF:
            raise EvalError("subtraction of +inf")
        if a == INF:
            return INF
        return _chk(a - b)
    if isinstance(node, Mul):
        a = _ev(node.left, x)
        b = _ev(node.right, x)
        if a == INF or b == INF:
            other = b if a == INF else a
            if other > 0:
                return INF
            raise EvalError("product with +inf and a nonpositive factor")
        return _chk(a * b)
    if isinstance(node, Div):
        a = _ev(node.left, x)
        b = _ev(node.right, x)
        if b == 0.0:
            raise EvalError("division by zero")
        if b == INF:
            if a == INF:
                raise EvalError("inf / inf")
            return 0.0
        if a == INF:
            if b > 0:
                return INF
            raise EvalError("+inf divided by a negative")
        return _chk(a / b)
    if isinstance(node, Pow):
        return _ev_pow(node, x)
    if isinstance(node, Abs):
        v = _ev(node.arg, x)
        return INF if v == INF else abs(v)
    if isinstance(node, Pos):
        v = _ev(node.arg, x)
        return INF if v == INF else max(v, 0.0)
    if isinstance(node, Exp):
        v = _ev(node.arg, x)
        if v == INF:
            return INF
        try:
            return math.exp(v)
        except OverflowError:
            return INF
    if isinstance(node, Max):
        vals = [_ev(a, x) for a in node.args]
        return max(vals)
    if isinstance(node, Min):
        vals = [_ev(a, x) for a in node.args]
        return min(vals)
    if isinstance(node, Indicator):
        return 0.0 if _ev_guard(node.guard, x) else INF
    if isinstance(node, Piecewise):
        for guard, body in node.branches:
            if _ev_guard(guard, x):
                return _ev(body, x)
        return _ev(node.default, x)
    raise TypeError(f"not an expression node: {node!r}")


def _ev_pow(node, x):
    v = _ev(node.base, x)
    num, den = node.num, node.den
    if v == INF:
        if num > 0:
            return INF
        if num < 0:
            return 0.0
        raise EvalError("inf^0 is undefined")
    if den % 2 == 0 and v < 0:
        raise EvalError("even root of a negative base")
    if v == 0.0:
        if num < 0:
            raise EvalError("division by zero (zero base, negative exponent)")
        return 1.0 if num == 0 else 0.0
    try:
        if den == 1:
            r = v ** num
        else:
            mag = math.sqrt(abs(v)) if (num, den) == (1, 2) else abs(v) ** (num / den)
            r = -mag if (v < 0 and num % 2 == 1) else mag
    except OverflowError:
        r = INF if not (v < 0 and num % 2 == 1) else -INF
    return _chk(r)


def evaluate(e, x):
    """Evaluate ``e`` at point ``x``; returns a finite float or ``+inf``."""
    if len(x) != e.n:
        raise ValueError(f"point has dimension {len(x)}, expression expects {e.n}")
    return _ev(e.root, x)


def uses_exp(e):
    """True when the tree contains an exp node (not semi-algebraic)."""
    def walk(node):
        if isinstance(node, Exp):
            return True
        if isinstance(node, (Neg, Abs, Pos)):
            return walk(node.arg)
        if isinstance(node, (Add, Sub, Mul, Div)):
            return walk(node.left) or walk(node.right)
        if isinstance(node, Pow):
            return walk(node.base)
        if isinstance(node, (Max, Min)):
            return any(walk(a) for a in node.args)
        if isinstance(node, Indicator):
            return any(walk(a.expr) for a in node.guard.atoms)
        if isinstance(node, Piecewise):
            return (any(walk(a.expr) for g, _ in node.branches for a in g.atoms)
                    or any(walk(b) for _, b in node.branches)
                    or walk(node.default))
        return False
    return walk(e.root)


def _ev_guard(guard, x):
    for atom in guard.atoms:
        v = _ev(atom.expr, x)
        if atom.rel == "==":
            ok = v == 0.0
        elif atom.rel == "!=":
            ok = v != 0.0
        elif atom.rel == "<=":
            ok = v <= 0.0
        else:
            ok = v < 0.0
        if not ok:
            return False
    return True


# ---------------------------------------------------------------------------
# vectorized evaluation
#
# Mirrors the scalar semantics over a batch of points: lanes where the
# scalar evaluator would raise come back as nan, +inf stays +inf.

def _clean(v):
    bad = np.isneginf(v)
    if bad.any():
        v = np.where(bad, np.nan, v)
    return v


def _evm(node, X):
    k = X.shape[0]
    if isinstance(node, Const):
        return np.full(k, node.value)
    if isinstance(node, Var):
        return X[:, node.index].astype(float, copy=True)
    if isinstance(node, Neg):
        return _clean(-_evm(node.arg, X))
    if isinstance(node, Add):
        return _clean(_evm(node.left, X) + _evm(node.right, X))
    if isinstance(node, Sub):
        a = _evm(node.left, X)
        b = _evm(node.right, X)
        out = a - b
        out = np.where(np.isposinf(b), np.nan, out)
        out = np.where(np.isposinf(a) & ~np.isnan(b) & ~np.isposinf(b), np.inf, out)
        return _clean(out)
    if isinstance(node, Mul):
        a = _evm(node.left, X)
        b = _evm(node.right, X)
        out = a * b
        inf_side = np.isposinf(a) | np.isposinf(b)
        other = np.where(np.isposinf(a), b, a)
        out = np.where(inf_side & (other > 0), np.inf, out)
        out = np.where(inf_side & ~(other > 0), np.nan, out)
        return _clean(out)
    if isinstance(node, Div):
        a = _evm(node.left, X)
        b = _evm(node.right, X)
        with np.errstate(all="ignore"):
            out = a / b
        out = np.where(b == 0.0, np.nan, out)
        out = np.where(np.isposinf(b) & np.isposinf(a), np.nan, out)
        out = np.where(np.isposinf(b) & ~np.isposinf(a) & ~np.isnan(a), 0.0, out)
        out = np.where(np.isposinf(a) & (b > 0) & ~np.isposinf(b), np.inf, out)
        out = np.where(np.isposinf(a) & (b < 0), np.nan, out)
        return _clean(out)
    if isinstance(node, Pow):
        return _evm_pow(node, X)
    if isinstance(node, Abs):
        return np.abs(_evm(node.arg, X))
    if isinstance(node, Pos):
        v = _evm(node.arg, X)
        return np.where(np.isnan(v), np.nan, np.maximum(v, 0.0))
    if isinstance(node, Exp):
        with np.errstate(all="ignore"):
            return np.exp(_evm(node.arg, X))
    if isinstance(node, (Max, Min)):
        vals = np.stack([_evm(a, X) for a in node.args])
        bad = np.isnan(vals).any(axis=0)
        agg = vals.max(axis=0) if isinstance(node, Max) else vals.min(axis=0)
        return np.where(bad, np.nan, agg)
    if isinstance(node, Indicator):
        hold, bad = _evm_guard(node.guard, X)
        out = np.where(hold, 0.0, np.inf)
        return np.where(bad, np.nan, out)
    if isinstance(node, Piecewise):
        out = _evm(node.default, X)
        assigned = np.zeros(k, dtype=bool)
        invalid = np.zeros(k, dtype=bool)
        for guard, body in node.branches:
            hold, bad = _evm_guard(guard, X)
            invalid |= bad & ~assigned
            sel = hold & ~assigned & ~bad
            if sel.any():
                out = np.where(sel, _evm(body, X), out)
            assigned |= sel | (bad & ~assigned)
        return np.where(invalid, np.nan, out)
    raise TypeError(f"not an expression node: {node!r}")


def _evm_pow(node, X):
    v = _evm(node.base, X)
    num, den = node.num, node.den
    with np.errstate(all="ignore"):
        if den == 1:
            out = v ** float(num)
            if num < 0:
                out = np.where(v == 0.0, np.nan, out)
            elif num == 0:
                out = np.where(v == 0.0, 1.0, out)
        else:
            mag = np.abs(v) ** (num / den)
            out = np.where((v < 0) & (num % 2 == 1), -mag, mag)
            if num < 0:
                out = np.where(v == 0.0, np.nan, out)
            elif num == 0:
                out = np.where(v == 0.0, 1.0, out)
    if num == 0:
        out = np.where(np.isposinf(v), np.nan, out)
    out = np.where((den % 2 == 0) & (v < 0), np.nan, out)
    return _clean(out)


def _evm_guard(guard, X):
    k = X.shape[0]
    hold = np.ones(k, dtype=bool)
    bad = np.zeros(k, dtype=bool)
    for atom in guard.atoms:
        v = _evm(atom.expr, X)
        bad |= np.isnan(v)
        if atom.rel == "==":
            ok = v == 0.0
        elif atom.rel == "!=":
            ok = v != 0.0
        elif atom.rel == "<=":
            ok = v <= 0.0
        else:
            ok = v < 0.0
        hold &= ok
    return hold, bad


def eval_many(e, X):
    """Evaluate ``e`` over rows of ``X``; invalid lanes come back as nan."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != e.n:
        raise ValueError(f"points have dimension {X.shape[1]}, expression expects {e.n}")
    with np.errstate(all="ignore"):
        return _clean(_evm(e.root, X))


# ---------------------------------------------------------------------------
# finite differences and gradient sampling

def fd_gradient(e, x, h=1e-6):
    """Central-difference gradient with a one-sided fallback at +inf arms."""
    if h <= 0:
        raise ValueError("step h must be positive")
    x = np.asarray(x, dtype=float)
    if x.shape != (e.n,):
        raise ValueError(f"point has shape {x.shape}, expected ({e.n},)")
    grad = np.empty(e.n)
    center = None
    for i in range(e.n):
        step = np.zeros(e.n)
        step[i] = h
        fp = _ev(e.root, x + step)
        fm = _ev(e.root, x - step)
        if fp < INF and fm < INF:
            g = (fp - fm) / (2.0 * h)
        else:
            if center is None:
                center = _ev(e.root, x)
            if center == INF:
                raise StencilError(f"objective is +inf at the stencil center (coordinate {i})")
            if fp < INF:
                g = (fp - center) / h
            elif fm < INF:
                g = (center - fm) / h
            else:
                raise StencilError(f"both stencil arms are +inf along coordinate {i}")
        if not math.isfinite(g):
            raise StencilError(f"nonfinite difference quotient along coordinate {i}")
        grad[i] = g
    return grad


def _uniform_ball(rng, n, radius):
    d = rng.standard_normal(n)
    nrm = float(np.linalg.norm(d))
    while nrm == 0.0:
        d = rng.standard_normal(n)
        nrm = float(np.linalg.norm(d))
    r = radius * rng.random() ** (1.0 / n)
    return (r / nrm) * d


def sample_subgradients(e, x, radius, count, seed, h=None):
    """Cloud of finite-difference gradients at points drawn in a ball.

    Perturbed points where any stencil arm fails to produce a finite value
    are discarded; the retry budget is 10x ``count``.  Deterministic for a
    fixed ``(center, radius, count, seed)``.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if radius <= 0:
        raise ValueError("radius must be positive")
    x = np.asarray(x, dtype=float)
    if h is None:
        h = min(1e-6, radius * 1e-2)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    samples = []
    attempts = 0
    while len(samples) < count and attempts < 10 * count:
        attempts += 1
        z = x + _uniform_ball(rng, e.n, radius)
        try:
            samples.append(fd_gradient(e, z, h=h))
        except (EvalError, StencilError):
            continue
    if len(samples) < count:
        raise SamplingError(
            f"only {len(samples)} of {count} gradient samples were finite "
            f"after {attempts} attempts"
        )
    arr = np.array(samples)
    arr.setflags(write=False)
    return GradientCloud(center=tuple(float(v) for v in x), samples=arr,
                         radius=float(radius), seed=int(seed))
