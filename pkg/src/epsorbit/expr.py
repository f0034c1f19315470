"""Closed-form expressions in one (or two) real variables.

The grammar is deliberately small and closed under differentiation::

    constant | variable | sum | product | quotient | power(base, real)
    | neglog(u) = -log(u) | exp(u) | omega(u, alpha)

where ``omega(u, alpha) = (u**-alpha - 1)/alpha`` for ``alpha != 0`` and
``-log(u)`` for ``alpha == 0`` (the compensator of a hyperbolic saddle).

Evaluation works in the log domain: every node reports ``(sign, log|value|)``
so that monomials such as ``x**40 * (-log x)**3`` stay representable for
``x`` down to ``1e-300`` and only the final value can under- or overflow.

Text syntax (recursive descent, ``^`` or ``**`` for powers)::

    x^2*(-log(x))      omega(x, 0.3)      exp(-1/(3*x))      x^1.5/(-log(x))
"""

from __future__ import annotations

import functools
import math
import re
from typing import NamedTuple

import numpy as np

from .errors import DomainError, NonFinite, NonPositive, ParseError

__all__ = [
    "Expression",
    "parse",
    "evaluate",
    "differentiate",
    "log_derivative_range",
    "LogDerivativeRange",
    "const",
    "var",
    "X",
    "compile_many",
]

_INV_E = math.exp(-1.0)


# ---------------------------------------------------------------------------
# nodes
# ---------------------------------------------------------------------------

class Node:
    """Immutable expression tree node. Equality is structural."""

    __slots__ = ("args", "_hash")

    def __init__(self, *args):
        self.args = args
        self._hash = hash((type(self).__name__, args))

    def __eq__(self, other):
        return (
            self is other
            or (type(self) is type(other) and self._hash == other._hash
                and self.args == other.args)
        )

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"{type(self).__name__}{self.args!r}"

    @property
    def children(self):
        return tuple(a for a in self.args if isinstance(a, Node))

    def walk(self):
        yield self
        for c in self.children:
            yield from c.walk()

    def value(self, env):
        sign, logabs = self.lg(env)
        return sign * np.exp(logabs)


class Const(Node):
    __slots__ = ()
    prec = 5

    def __init__(self, value):
        super().__init__(float(value))

    @property
    def v(self):
        return self.args[0]

    def lg(self, env):
        v = self.v
        return math.copysign(1.0, v) if v else 0.0, (math.log(abs(v)) if v else -math.inf)

    def fmt(self):
        return _fmt_number(self.v)

    def code(self):
        return f"({self.v!r})"


class Var(Node):
    __slots__ = ()
    prec = 5

    @property
    def name(self):
        return self.args[0]

    def lg(self, env):
        v = env[self.name]
        return np.sign(v), np.log(np.abs(v))

    def value(self, env):
        return env[self.name]

    def fmt(self):
        return self.name

    def code(self):
        return self.name


class Add(Node):
    __slots__ = ()
    prec = 1

    def lg(self, env):
        parts = [t.lg(env) for t in self.args]
        signs = [p[0] for p in parts]
        logs = [p[1] for p in parts]
        top = functools.reduce(np.maximum, logs)
        has_inf = np.isposinf(top)
        shift = np.where(np.isfinite(top), top, 0.0)
        acc = 0.0
        inf_acc = 0.0
        for s, lg in zip(signs, logs):
            acc = acc + s * np.exp(np.where(np.isposinf(lg), -np.inf, lg - shift))
            inf_acc = inf_acc + np.where(np.isposinf(lg), s, 0.0)
        # several infinite terms of opposite sign cancel to nan
        inf_sign = np.where(np.abs(inf_acc) >= 1.0, np.sign(inf_acc), np.nan)
        sign = np.where(has_inf, inf_sign, np.sign(acc))
        logabs = np.where(has_inf, np.inf, shift + np.log(np.abs(acc)))
        return sign, logabs

    def fmt(self):
        out = []
        for i, t in enumerate(self.args):
            neg, mag = _split_negative(t)
            body = _wrap(mag, 1) if neg else _wrap(t, 1)
            if i == 0:
                out.append(("-" + _wrap(mag, 2)) if neg else body)
            else:
                out.append((" - " + _wrap(mag, 2)) if neg else (" + " + body))
        return "".join(out)

    def code(self):
        return "(" + " + ".join(t.code() for t in self.args) + ")"


class Mul(Node):
    __slots__ = ()
    prec = 2

    def lg(self, env):
        sign, logabs = 1.0, 0.0
        for f in self.args:
            s, lg = f.lg(env)
            sign = sign * s
            logabs = logabs + lg
        return sign, logabs

    def fmt(self):
        neg, mag = _split_negative(self)
        if neg:
            return "-" + _wrap(mag, 3)
        return "*".join(_wrap(f, 2) for f in self.args)

    def code(self):
        return "(" + " * ".join(f.code() for f in self.args) + ")"


class Div(Node):
    __slots__ = ()
    prec = 2

    def lg(self, env):
        sn, ln = self.args[0].lg(env)
        sd, ld = self.args[1].lg(env)
        return sn * sd, ln - ld

    def fmt(self):
        num, den = self.args
        return f"{_wrap(num, 2)}/{_wrap(den, 3)}"

    def code(self):
        return f"({self.args[0].code()} / {self.args[1].code()})"


class Pow(Node):
    __slots__ = ()
    prec = 4

    def __init__(self, base, exponent):
        super().__init__(base, float(exponent))

    def lg(self, env):
        base, p = self.args
        s, lg = base.lg(env)
        if float(p).is_integer():
            sign = s ** int(p) if p >= 0 else np.where(s == 0, 0.0, s ** int(-p))
        else:
            sign = np.where(s < 0, np.nan, s)
        logabs = p * lg
        return sign, logabs

    def fmt(self):
        base, p = self.args
        ptxt = _fmt_number(p)
        if p < 0:
            ptxt = f"({ptxt})"
        return f"{_wrap(base, 5)}^{ptxt}"

    def code(self):
        base, p = self.args
        pt = repr(int(p)) if float(p).is_integer() else repr(p)
        return f"({base.code()} ** {pt})"


class NegLog(Node):
    __slots__ = ()
    prec = 5

    def lg(self, env):
        s, lg = self.args[0].lg(env)
        v = np.where(s > 0, -lg, np.nan)
        return np.sign(v), np.log(np.abs(v))

    def fmt(self):
        return f"(-log({self.args[0].fmt()}))"

    def code(self):
        return f"(-_log({self.args[0].code()}))"


class Exp(Node):
    __slots__ = ()
    prec = 5

    def lg(self, env):
        v = self.args[0].value(env)
        return np.where(np.isnan(v), np.nan, 1.0), v

    def fmt(self):
        return f"exp({self.args[0].fmt()})"

    def code(self):
        return f"_exp({self.args[0].code()})"


class Omega(Node):
    __slots__ = ()
    prec = 5

    def __init__(self, arg, alpha):
        super().__init__(arg, float(alpha))

    def lg(self, env):
        arg, alpha = self.args
        s, lg = arg.lg(env)
        neglog_x = np.where(s > 0, -lg, np.nan)
        # omega = (-log x) * expm1(t)/t with t = alpha*(-log x); expm1(t)/t > 0
        t = alpha * neglog_x
        big = t > 1.0
        tb = np.where(big, t, 2.0)
        ts = np.where(big | (t == 0), 1.0, t)
        phi = np.where(t == 0, 0.0, np.log(np.expm1(ts) / ts))
        phi = np.where(big, tb + np.log1p(-np.exp(-tb)) - np.log(tb), phi)
        return np.sign(neglog_x), np.log(np.abs(neglog_x)) + phi

    def fmt(self):
        arg, alpha = self.args
        return f"omega({arg.fmt()}, {_fmt_number(alpha)})"

    def code(self):
        arg, alpha = self.args
        if alpha == 0.0:
            return f"(-_log({arg.code()}))"
        return f"(_expm1({-alpha!r} * _log({arg.code()})) / {alpha!r})"


def _fmt_number(v):
    if float(v).is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def _split_negative(node):
    """Return (True, |node|) when node prints naturally with a leading minus."""
    if isinstance(node, Const) and node.v < 0:
        return True, Const(-node.v)
    if isinstance(node, Mul) and isinstance(node.args[0], Const) and node.args[0].v < 0:
        rest = mul(Const(-node.args[0].v), *node.args[1:])
        return True, rest
    return False, node


def _wrap(node, prec):
    txt = node.fmt()
    p = node.prec
    if isinstance(node, Const) and node.v < 0:
        p = 0
    if isinstance(node, Mul) and _split_negative(node)[0]:
        p = 0
    return f"({txt})" if p < prec else txt


# ---------------------------------------------------------------------------
# smart constructors (light simplification keeps derivative trees small)
# ---------------------------------------------------------------------------

ZERO = Const(0.0)
ONE = Const(1.0)


def const(v):
    return Const(v)


def var(name="x"):
    return Var(name)


def add(*terms):
    flat = []
    c = 0.0
    for t in terms:
        items = t.args if isinstance(t, Add) else (t,)
        for it in items:
            if isinstance(it, Const):
                c += it.v
            else:
                flat.append(it)
    if c != 0.0 or not flat:
        flat.append(Const(c))
    return flat[0] if len(flat) == 1 else Add(*flat)


def _is_int(p):
    return float(p).is_integer()


def mul(*factors):
    c = 1.0
    order = []
    powers = {}
    for f in factors:
        items = f.args if isinstance(f, Mul) else (f,)
        for it in items:
            if isinstance(it, Const):
                c *= it.v
                continue
            base, p = (it.args[0], it.args[1]) if isinstance(it, Pow) else (it, 1.0)
            if base in powers and _is_int(p) and _is_int(powers[base]):
                powers[base] += p
            else:
                key = base if base not in powers else (base, len(order))
                powers[key] = p
                order.append(key)
    if c == 0.0:
        return ZERO
    out = []
    for key in order:
        p = powers[key]
        base = key[0] if isinstance(key, tuple) else key
        if p == 0.0:
            continue
        out.append(base if p == 1.0 else Pow(base, p))
    if c != 1.0 or not out:
        out.insert(0, Const(c))
    return out[0] if len(out) == 1 else Mul(*out)


def neg(a):
    return mul(Const(-1.0), a)


def sub(a, b):
    return add(a, neg(b))


def div(a, b):
    if b == ONE:
        return a
    if isinstance(b, Const):
        if b.v == 0.0:
            return Div(a, b)
        return mul(Const(1.0 / b.v), a)
    if a == ZERO:
        return ZERO
    if a == b:
        return ONE
    if isinstance(b, Var) or (isinstance(b, Pow) and _is_int(b.args[1])):
        return mul(a, power(b, -1.0))
    return Div(a, b)


def power(b, p):
    p = float(p)
    if p == 0.0:
        return ONE
    if p == 1.0:
        return b
    if isinstance(b, Const):
        if b.v >= 0 or _is_int(p):
            return Const(b.v ** p)
    if isinstance(b, Pow) and _is_int(p) and _is_int(b.args[1]):
        return power(b.args[0], b.args[1] * p)
    return Pow(b, p)


def neglog(a):
    if isinstance(a, Const) and a.v > 0:
        return Const(-math.log(a.v))
    return NegLog(a)


def exp_(a):
    if isinstance(a, Const):
        return Const(math.exp(a.v))
    return Exp(a)


def omega(a, alpha):
    alpha = float(alpha)
    if alpha == 0.0:
        return neglog(a)
    return Omega(a, alpha)


# ---------------------------------------------------------------------------
# differentiation
# ---------------------------------------------------------------------------

@functools.lru_cache(maxsize=200_000)
def _d(node, v):
    if isinstance(node, Const):
        return ZERO
    if isinstance(node, Var):
        return ONE if node.name == v else ZERO
    if isinstance(node, Add):
        return add(*(_d(t, v) for t in node.args))
    if isinstance(node, Mul):
        terms = []
        fs = node.args
        for i, f in enumerate(fs):
            df = _d(f, v)
            if df == ZERO:
                continue
            terms.append(mul(*fs[:i], df, *fs[i + 1:]))
        return add(*terms) if terms else ZERO
    if isinstance(node, Div):
        a, b = node.args
        da, db = _d(a, v), _d(b, v)
        first = div(da, b) if da != ZERO else ZERO
        if db == ZERO:
            return first
        return sub(first, div(mul(a, db), power(b, 2)))
    if isinstance(node, Pow):
        b, p = node.args
        db = _d(b, v)
        if db == ZERO:
            return ZERO
        return mul(Const(p), power(b, p - 1.0), db)
    if isinstance(node, NegLog):
        a = node.args[0]
        da = _d(a, v)
        if da == ZERO:
            return ZERO
        return neg(div(da, a))
    if isinstance(node, Exp):
        a = node.args[0]
        da = _d(a, v)
        if da == ZERO:
            return ZERO
        return mul(node, da)
    if isinstance(node, Omega):
        a, alpha = node.args
        da = _d(a, v)
        if da == ZERO:
            return ZERO
        return mul(Const(-1.0), power(a, -alpha - 1.0), da)
    raise TypeError(f"unknown node {node!r}")


# ---------------------------------------------------------------------------
# public wrapper
# ---------------------------------------------------------------------------

def _has_log(node):
    return any(isinstance(n, NegLog) for n in node.walk())


class Expression:
    """Evaluable, differentiable closed form valid on ``(0, d)``.

    ``d`` defaults to ``1/e`` when the tree contains ``-log`` (so that
    ``-log x > 1``), and to ``1`` otherwise.
    """

    __slots__ = ("node", "d", "_compiled")

    def __init__(self, node, d=None):
        if isinstance(node, Expression):
            node = node.node
        elif isinstance(node, (int, float)):
            node = Const(node)
        self.node = node
        if d is None:
            d = _INV_E if _has_log(node) else 1.0
        if not d > 0:
            raise DomainError(f"domain bound must be positive, got {d}")
        self.d = float(d)
        self._compiled = None

    # -- identity --------------------------------------------------------
    def __eq__(self, other):
        return isinstance(other, Expression) and self.node == other.node and self.d == other.d

    def __hash__(self):
        return hash((self.node, self.d))

    def __repr__(self):
        return f"Expression({str(self)!r}, d={self.d!r})"

    def __str__(self):
        return self.node.fmt()

    @property
    def variables(self):
        return sorted({n.name for n in self.node.walk() if isinstance(n, Var)})

    @property
    def size(self):
        return sum(1 for _ in self.node.walk())

    # -- arithmetic ------------------------------------------------------
    def _other(self, other):
        if isinstance(other, Expression):
            return other.node, min(self.d, other.d)
        return Const(other), self.d

    def __add__(self, other):
        n, d = self._other(other)
        return Expression(add(self.node, n), d)

    __radd__ = __add__

    def __sub__(self, other):
        n, d = self._other(other)
        return Expression(sub(self.node, n), d)

    def __rsub__(self, other):
        n, d = self._other(other)
        return Expression(sub(n, self.node), d)

    def __mul__(self, other):
        n, d = self._other(other)
        return Expression(mul(self.node, n), d)

    __rmul__ = __mul__

    def __truediv__(self, other):
        n, d = self._other(other)
        return Expression(div(self.node, n), d)

    def __rtruediv__(self, other):
        n, d = self._other(other)
        return Expression(div(n, self.node), d)

    def __neg__(self):
        return Expression(neg(self.node), self.d)

    def __pow__(self, p):
        return Expression(power(self.node, float(p)), self.d)

    def with_domain(self, d):
        return Expression(self.node, d)

    # -- evaluation ------------------------------------------------------
    def __call__(self, x=None, **env):
        """Vectorized evaluation without domain checks; may return nan/inf."""
        if x is not None:
            env["x"] = x
        env = {k: np.asarray(v, dtype=float) for k, v in env.items()}
        shape = np.broadcast_shapes(*(v.shape for v in env.values())) if env else ()
        with np.errstate(all="ignore"):
            out = self.node.value(env)
        out = np.broadcast_to(np.asarray(out, dtype=float), shape)
        return out.copy() if out.ndim else float(out)

    def log_abs(self, x):
        """``(sign, log|e(x)|)`` on an array, free of under/overflow."""
        env = {"x": np.asarray(x, dtype=float)}
        with np.errstate(all="ignore"):
            s, lg = self.node.lg(env)
        shape = env["x"].shape
        return np.broadcast_to(s, shape).copy(), np.broadcast_to(lg, shape).copy()

    def eval(self, x):
        x = float(x)
        if not (0.0 < x < self.d):
            raise DomainError(f"x = {x!r} outside (0, {self.d!r})")
        v = self(x)
        if not math.isfinite(v):
            raise NonFinite(f"{self} is not finite at x = {x!r}")
        return v

    def diff(self, v="x"):
        return Expression(_d(self.node, v), self.d)

    def compile(self):
        """Plain-Python scalar evaluator (fast path for orbit iteration).

        Evaluation errors surface as Python exceptions (ValueError,
        ZeroDivisionError, OverflowError).
        """
        if self._compiled is None:
            names = self.variables or ["x"]
            src = f"lambda {', '.join(names)}: {self.node.code()}"
            ns = {"_log": math.log, "_exp": math.exp, "_expm1": math.expm1}
            self._compiled = eval(src, ns)  # noqa: S307 -- source built from our own tree
        return self._compiled


X = Expression(Var("x"))


def evaluate(e, x):
    """Value of ``e`` at a single point ``x`` in ``(0, e.d)``."""
    return e.eval(x)


def differentiate(e, v="x"):
    return e.diff(v)


# ---------------------------------------------------------------------------
# power conditions
# ---------------------------------------------------------------------------

class LogDerivativeRange(NamedTuple):
    m: float
    M: float
    sublinear: bool
    upper_power_ok: bool
    x: np.ndarray
    values: np.ndarray


def log_derivative_range(e, x_lo, x_hi, n=200):
    """Sampled range of ``x * (log e)'(x)`` on a geometric grid.

    ``upper_power_ok`` is False when the sampled values keep growing at a
    non-decaying rate towards ``x_lo`` (e.g. ``exp(-1/x)`` gives ``1/x``).
    """
    if not (0 < x_lo < x_hi < e.d):
        raise DomainError(f"need 0 < x_lo < x_hi < d = {e.d}")
    xs = np.geomspace(x_hi, x_lo, int(n))
    s, _ = e.log_abs(xs)
    bad = np.nonzero(~(s > 0))[0]
    if bad.size:
        raise NonPositive(f"{e} is not positive at x = {xs[bad[0]]!r}")
    de = e.diff()
    # x e'/e with the quotient taken in the log domain
    ds, dlg = de.log_abs(xs)
    _, lg = e.log_abs(xs)
    vals = ds * np.exp(np.log(xs) + dlg - lg)
    finite = np.isfinite(vals)
    m = float(np.min(vals)) if finite.all() else float("nan")
    M = float(np.max(vals)) if finite.all() else float("inf")
    upper_ok = bool(finite.all()) and not _grows_without_bound(xs, vals)
    return LogDerivativeRange(m, M, bool(m > 1.0), upper_ok, xs, vals)


def _grows_without_bound(xs, vals):
    """Does the sequence (ordered towards x_lo) keep increasing per decade?"""
    lx = np.log10(xs)
    if lx[0] - lx[-1] < 2.0:
        return False
    at = lambda dec: float(np.interp(-(lx[-1] + dec), -lx, vals))  # noqa: E731
    last, prev, prev2 = at(0.0), at(1.0), at(2.0)
    inc1, inc2 = last - prev, prev - prev2
    scale = max(abs(last), 1e-300)
    if inc1 <= 1e-3 * scale or inc2 <= 0:
        return False
    return inc1 >= 0.9 * inc2


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>\*\*|[-+*/^(),]))"
)

_CONSTANTS = {"pi": math.pi, "e": math.e}


class _Parser:
    def __init__(self, text, variables, constants, allow_log):
        self.text = text
        self.variables = set(variables)
        self.constants = dict(_CONSTANTS)
        self.constants.update(constants or {})
        self.allow_log = allow_log
        self.tokens = self._tokenize()
        self.i = 0

    def _offset(self, char_pos):
        return len(self.text[:char_pos].encode("utf-8"))

    def _tokenize(self):
        out = []
        pos = 0
        text = self.text
        while pos < len(text):
            if text[pos:].strip() == "":
                break
            m = _TOKEN.match(text, pos)
            if not m or m.end() == pos:
                raise ParseError(f"unexpected character {text[pos:].lstrip()[:1]!r}",
                                 self._offset(pos + len(text[pos:]) - len(text[pos:].lstrip())))
            kind = m.lastgroup
            start = m.start(kind)
            out.append((kind, m.group(kind), self._offset(start)))
            pos = m.end()
        out.append(("end", "", self._offset(len(text))))
        return out

    def peek(self):
        return self.tokens[self.i]

    def take(self, value=None):
        tok = self.tokens[self.i]
        if value is not None and tok[1] != value:
            what = tok[1] or "end of input"
            raise ParseError(f"expected {value!r}, found {what!r}", tok[2])
        self.i += 1
        return tok

    def parse(self):
        node = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            raise ParseError(f"unexpected {tok[1]!r}", tok[2])
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            rhs = self.term()
            node = add(node, rhs) if op == "+" else sub(node, rhs)
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/"):
            op = self.take()[1]
            rhs = self.unary()
            node = mul(node, rhs) if op == "*" else div(node, rhs)
        return node

    def unary(self):
        if self.peek()[1] == "-":
            self.take()
            return neg(self.unary())
        if self.peek()[1] == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[1] in ("^", "**"):
            tok = self.take()
            exponent = self.unary()
            if not isinstance(exponent, Const):
                raise ParseError("exponent must be a constant", tok[2])
            return power(base, exponent.v)
        return base

    def atom(self):
        kind, val, off = self.take()
        if kind == "num":
            return Const(float(val))
        if val == "(":
            node = self.expr()
            self.take(")")
            return node
        if kind == "name":
            if self.peek()[1] == "(":
                return self.call(val, off)
            if val in self.variables:
                return Var(val)
            if val in self.constants:
                return Const(self.constants[val])
            raise ParseError(f"unknown name {val!r}", off)
        raise ParseError(f"unexpected {val or 'end of input'!r}", off)

    def call(self, name, off):
        self.take("(")
        args = [self.expr()]
        while self.peek()[1] == ",":
            self.take()
            args.append(self.expr())
        self.take(")")
        if name in ("log", "ln", "omega") and not self.allow_log:
            raise ParseError(f"{name} is not allowed here", off)
        if name in ("log", "ln") and len(args) == 1:
            return neg(neglog(args[0]))
        if name == "exp" and len(args) == 1:
            return exp_(args[0])
        if name == "sqrt" and len(args) == 1:
            return power(args[0], 0.5)
        if name == "omega" and len(args) == 2:
            if not isinstance(args[1], Const):
                raise ParseError("omega exponent must be a constant", off)
            return omega(args[0], args[1].v)
        raise ParseError(f"unknown function {name}/{len(args)}", off)


def parse(text, d=None, variables=("x",), constants=None, allow_log=True):
    """Parse expression text; errors report the byte offset of the problem."""
    node = _Parser(text, variables, constants, allow_log).parse()
    return Expression(node, d)


def compile_many(exprs, names=("x", "y")):
    """One plain-Python function returning a tuple of several expressions."""
    body = ", ".join(e.node.code() for e in exprs)
    src = f"lambda {', '.join(names)}: ({body},)"
    ns = {"_log": math.log, "_exp": math.exp, "_expm1": math.expm1}
    return eval(src, ns)  # noqa: S307 -- source built from our own trees
