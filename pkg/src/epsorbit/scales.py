"""Chebyshev scales: axiom checks, generalized derivatives and inverses.

A scale is an ordered family ``u_0, ..., u_l`` on ``(0, d)``.  The
division-differentiation recursion

    D_0(f) = f / u_0,        D_{i+1}(f) = D_i(f)' / D_i(u_{i+1})'

plays the role of Taylor coefficients: ``D_i(f)(0)`` is the i-th
development coefficient of ``f``.  Limits at 0 are numerical and follow a
declared stabilization test (see :func:`stabilized_limit`).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import NamedTuple

import numpy as np
import sympy as sp

from . import expr as ex
from .errors import (
    DataError,
    DegenerateScale,
    EvaluationError,
    NotMonotone,
    OutOfRange,
)
from .expr import Expression, parse

__all__ = [
    "ChebyshevScale",
    "GeneralizedDerivativeValue",
    "ValidationReport",
    "AxiomFailure",
    "MultiplicityBound",
    "stabilized_limit",
    "invert",
    "jacobian_rank",
    "load_scale",
    "scale_names",
]

DIVERGES = "diverges"
INDETERMINATE = "indeterminate"
BEYOND = "beyond scale"

AGREE_RTOL = 1e-3
TIE_RTOL = 1e-9


def stabilized_limit(values):
    """Declared limit of a sample sequence ordered towards ``x -> 0``.

    * last three samples agree to relative 1e-3: the last sample (values
      below ``1e-9 * max|v|`` count as 0);
    * infinite, or monotone growth by a factor >= 2 over the last four
      samples, or steady growth (non-shrinking increments) over the whole
      sequence by a total factor >= 2: ``"diverges"``;
    * monotone decay in magnitude by a total factor >= 2: ``0.0``;
    * anything else: ``"indeterminate"``.
    """
    v = np.asarray(values, dtype=float)
    if v.size < 4:
        raise ValueError("need at least four samples")
    if np.isnan(v[-3:]).any():
        return INDETERMINATE
    a = np.abs(v)
    if np.isinf(v[-1]):
        return DIVERGES
    if not np.isfinite(v).all():
        v, a = v[np.isfinite(v)], a[np.isfinite(v)]
        if v.size < 4:
            return INDETERMINATE
    top = float(np.max(a))
    last3 = v[-3:]
    spread = float(np.max(last3) - np.min(last3))
    if spread <= AGREE_RTOL * abs(float(v[-1])) or top == 0.0:
        val = float(v[-1])
        return 0.0 if abs(val) < TIE_RTOL * top or val == 0.0 else val
    tail = a[-4:]
    same_sign = (np.sign(v[-4:]) == np.sign(v[-1])).all()
    if same_sign and (np.diff(tail) > 0).all() and tail[-1] >= 2.0 * tail[0]:
        return DIVERGES
    if same_sign and _steady_growth(a):
        return DIVERGES
    if same_sign and (np.diff(tail) < 0).all() and tail[-1] * 2.0 <= top:
        return 0.0
    if abs(float(v[-1])) < TIE_RTOL * top:
        return 0.0
    return INDETERMINATE


def _steady_growth(a):
    inc = np.diff(a)
    if not (inc > 0).all() or a[-1] < 2.0 * a[0]:
        return False
    return inc[-1] >= 0.9 * float(np.min(inc[:-1]))


@dataclass(frozen=True)
class GeneralizedDerivativeValue:
    index: int
    value: object  # float, "diverges" or "indeterminate"
    samples: tuple  # ((x, D_i f(x)), ...) ordered towards 0

    @property
    def finite(self):
        return isinstance(self.value, float)


@dataclass(frozen=True)
class AxiomFailure:
    axiom: str
    indices: tuple
    x: float
    detail: str


@dataclass
class ValidationReport:
    name: str
    failures: list = field(default_factory=list)
    checked: dict = field(default_factory=dict)

    @property
    def ok(self):
        return not self.failures

    def passed(self, axiom):
        return not any(f.axiom == axiom for f in self.failures)

    def __str__(self):
        if self.ok:
            return f"scale {self.name}: all axioms pass"
        lines = [f"scale {self.name}: {len(self.failures)} failure(s)"]
        for f in self.failures:
            lines.append(f"  {f.axiom} {f.indices} at x={f.x!r}: {f.detail}")
        return "\n".join(lines)


class MultiplicityBound(NamedTuple):
    k0: object  # int or "beyond scale" / "indeterminate"
    bound: object
    values: tuple
    notes: tuple


def invert(e, y, lo=1e-300, hi=None, iters=200):
    """Solve ``e(x) = y`` for increasing positive ``e`` by bisection in log x.

    Works on scalars or arrays of ``y``; comparisons are made on
    ``log e`` so arguments down to 1e-300 stay meaningful.
    """
    hi = math.nextafter(e.d, 0.0) if hi is None else hi
    y_arr = np.atleast_1d(np.asarray(y, dtype=float))
    if (y_arr <= 0).any() or not np.isfinite(y_arr).all():
        raise OutOfRange("target values must be positive and finite")
    ly = np.log(y_arr)
    s_hi, lg_hi = e.log_abs(np.array([hi]))
    s_lo, lg_lo = e.log_abs(np.array([lo]))
    if not (s_hi[0] > 0) or not (s_lo[0] >= 0):
        raise NotMonotone(f"{e} is not positive on the bracket")
    if lg_hi[0] < lg_lo[0]:
        raise NotMonotone(f"{e} does not increase on (0, {e.d})")
    if (ly >= lg_hi[0]).any():
        raise OutOfRange(f"value {float(y_arr.max())!r} not below {e}(d-) = {math.exp(lg_hi[0])!r}")
    if (ly < lg_lo[0]).any():
        raise OutOfRange(f"value {float(y_arr.min())!r} below {e}({lo!r})")
    a = np.full_like(ly, math.log(lo))
    b = np.full_like(ly, math.log(hi))
    for _ in range(iters):
        mid = 0.5 * (a + b)
        s, lg = e.log_abs(np.exp(mid))
        if (s <= 0).any() or np.isnan(lg).any():
            raise NotMonotone(f"{e} lost positivity during bracketing")
        below = lg < ly
        a = np.where(below, mid, a)
        b = np.where(below, b, mid)
    x = np.exp(0.5 * (a + b))
    return float(x[0]) if np.ndim(y) == 0 else x


# Generalized derivatives are built symbolically and reduced to lowest terms;
# without cancellation the quotient rule makes D_i grow exponentially in i.

def to_sympy(node, symbols):
    t = type(node)
    if t is ex.Const:
        return sp.Rational(repr(node.v)) if math.isfinite(node.v) else sp.Float(node.v)
    if t is ex.Var:
        return symbols[node.name]
    if t is ex.Add:
        return sp.Add(*(to_sympy(a, symbols) for a in node.args))
    if t is ex.Mul:
        return sp.Mul(*(to_sympy(a, symbols) for a in node.args))
    if t is ex.Div:
        return to_sympy(node.args[0], symbols) / to_sympy(node.args[1], symbols)
    if t is ex.Pow:
        return to_sympy(node.args[0], symbols) ** sp.Rational(repr(node.args[1]))
    if t is ex.NegLog:
        return -sp.log(to_sympy(node.args[0], symbols))
    if t is ex.Exp:
        return sp.exp(to_sympy(node.args[0], symbols))
    if t is ex.Omega:
        a = to_sympy(node.args[0], symbols)
        alpha = sp.Rational(repr(node.args[1]))
        return (a ** -alpha - 1) / alpha
    raise TypeError(f"cannot convert {node!r}")


def from_sympy(e, special=None):
    special = special or {}
    if e.is_Symbol and e.name in special:
        return special[e.name]
    if e.is_Number or e in (sp.E, sp.pi):
        return ex.Const(float(e))
    if e.is_Symbol:
        return ex.Var(e.name)
    if e.is_Add:
        return ex.add(*(from_sympy(a, special) for a in e.args))
    if e.is_Mul:
        return ex.mul(*(from_sympy(a, special) for a in e.args))
    if e.is_Pow:
        base, p = e.args
        if not p.is_Number:
            raise TypeError(f"non-constant exponent in {e}")
        return ex.power(from_sympy(base, special), float(p))
    if isinstance(e, sp.log):
        return ex.neg(ex.neglog(from_sympy(e.args[0], special)))
    if isinstance(e, sp.exp):
        return ex.exp_(from_sympy(e.args[0], special))
    raise TypeError(f"cannot convert {e}")


_L = sp.Symbol("_neglog_x", positive=True)


def _reduce(e):
    return sp.cancel(sp.powsimp(e))


def _to_node(e, x):
    """sympy -> node tree, writing log(x) as the positive quantity -log x."""
    e = sp.cancel(e.subs(sp.log(x), -_L))
    return from_sympy(e, {_L.name: ex.neglog(ex.Var(x.name))})


class ChebyshevScale:
    """Ordered family ``u_0 .. u_l`` of :class:`Expression` on ``(0, d)``.

    ``orders`` optionally labels the members (e.g. ``[1, 3, 5]`` for the odd
    powers); reported critical orders use these labels.  By default the
    label is the position.
    """

    def __init__(self, members, d=None, name="scale", orders=None):
        members = [m if isinstance(m, Expression) else parse(str(m)) for m in members]
        if len(members) < 2:
            raise DataError("a scale needs at least two members")
        if d is None:
            d = min(m.d for m in members)
        # d is where the axioms are claimed; members keep their own domain
        # hints so they can still be inverted above d where monotone.
        self.d = float(d)
        self.members = tuple(members)
        self.name = name
        self.orders = tuple(range(len(members))) if orders is None else tuple(orders)
        if len(self.orders) != len(self.members):
            raise DataError("orders must label every member")
        self._dcache = {}
        self._dens = {}
        self._sym = {"x": sp.Symbol("x", positive=True)}

    def __len__(self):
        return len(self.members)

    def __repr__(self):
        body = ", ".join(str(m) for m in self.members)
        return f"ChebyshevScale({self.name!r}, d={self.d!r}, [{body}])"

    @property
    def top(self):
        return len(self.members) - 1

    def grid(self, j_max=12):
        return self.d * 10.0 ** -np.arange(1, j_max + 1)

    # -- division-differentiation -----------------------------------------
    def _den(self, i):
        # (D_i(u_{i+1}))'
        if i not in self._dens:
            x = self._sym["x"]
            self._dens[i] = _reduce(sp.diff(self._Ds(i, self.members[i + 1].node), x))
        return self._dens[i]

    def _Ds(self, i, node):
        key = (i, node)
        if key not in self._dcache:
            if i == 0:
                u0 = to_sympy(self.members[0].node, self._sym)
                out = _reduce(to_sympy(node, self._sym) / u0)
            else:
                x = self._sym["x"]
                den = self._den(i - 1)
                if den == 0:
                    raise DegenerateScale(f"(D_{i - 1}(u_{i}))' vanishes identically")
                out = _reduce(sp.diff(self._Ds(i - 1, node), x) / den)
            self._dcache[key] = out
        return self._dcache[key]

    def D(self, i, f):
        """The expression ``D_i(f)``."""
        if not 0 <= i <= self.top:
            raise IndexError(f"index {i} outside 0..{self.top}")
        f = f.with_domain(self.d) if isinstance(f, Expression) else parse(str(f), self.d)
        return Expression(_to_node(self._Ds(i, f.node), self._sym["x"]), self.d)

    def _den_expr(self, i):
        return Expression(_to_node(self._den(i), self._sym["x"]), self.d)

    def generalized_derivative(self, f, i, j_max=12):
        expr = self.D(i, f)
        xs = self.grid(j_max)
        if i > 0:
            sign, _ = self._den_expr(i - 1).log_abs(xs)
            bad = np.nonzero(~(np.abs(sign) > 0))[0]
            if bad.size:
                raise DegenerateScale(
                    f"(D_{i - 1}(u_{i}))' vanishes at x = {float(xs[bad[0]])!r}")
        vals = expr(xs)
        return GeneralizedDerivativeValue(
            i, stabilized_limit(vals), tuple(zip(xs.tolist(), vals.tolist())))

    # -- axioms ------------------------------------------------------------
    def validation_grid(self, ppd=40, decades=12):
        n = int(round(decades * ppd)) + 1
        return np.geomspace(self.d * 10.0 ** -decades, 0.95 * self.d, n)

    def validate(self, ppd=40):
        rep = ValidationReport(self.name)
        xs = self.validation_grid(ppd)
        for i in range(1, len(self.members)):
            s, lg = self.members[i].log_abs(xs)
            bad = np.nonzero(~(s > 0))[0]
            if bad.size:
                rep.failures.append(AxiomFailure("positive", (i,), float(xs[bad[0]]),
                                                 f"u_{i} is not positive"))
                continue
            bad = np.nonzero(~(np.diff(lg) > 0))[0]
            if bad.size:
                rep.failures.append(AxiomFailure("increasing", (i,), float(xs[bad[0]]),
                                                 f"u_{i} is not strictly increasing"))
        for i in range(self.top):
            s, lg = self.D(i, self.members[i + 1]).log_abs(xs)
            ok = (s > 0).all() and (np.diff(lg) > 0).all()
            if not ok:
                k = int(np.nonzero(~((s[1:] > 0) & (np.diff(lg) > 0)))[0][0]) if (s > 0).any() else 0
                rep.failures.append(AxiomFailure(
                    "derivative_increasing", (i, i + 1), float(xs[k]),
                    f"D_{i}(u_{i + 1}) is not strictly increasing"))
        for i in range(1, len(self.members)):
            for j in range(i):
                try:
                    g = self.generalized_derivative(self.members[i], j)
                except DegenerateScale as exc:
                    rep.failures.append(AxiomFailure("flatness", (j, i), float("nan"), str(exc)))
                    continue
                rep.checked[(j, i)] = g.value
                if g.value != 0.0:
                    x_last, v_last = g.samples[-1]
                    rep.failures.append(AxiomFailure(
                        "flatness", (j, i), x_last,
                        f"D_{j}(u_{i}) -> {g.value} (last sample {v_last!r})"))
        return rep

    # -- inverses and bounds -------------------------------------------------
    def invert_member(self, i, y):
        if not 1 <= i <= self.top:
            raise IndexError(f"member index {i} outside 1..{self.top}")
        return invert(self.members[i], y)

    def multiplicity_bound(self, f):
        values, notes = [], []
        k0 = BEYOND
        for i in range(len(self.members)):
            g = self.generalized_derivative(f, i)
            values.append(g.value)
            if g.value == DIVERGES and k0 == BEYOND and all(v == DIVERGES for v in values):
                notes.append(f"D_{i}(f)(0) diverges before any nonzero coefficient; skipped")
                continue
            if g.value == INDETERMINATE:
                k0 = INDETERMINATE
                notes.append(f"D_{i}(f)(0) has no stable limit")
                break
            if g.value == DIVERGES or g.value != 0.0:
                k0 = i
                break
        return MultiplicityBound(k0, k0, tuple(values), tuple(notes))

    def label(self, i):
        return self.orders[i]

    def to_json(self):
        out = {"name": self.name, "d": self.d, "members": [str(m) for m in self.members]}
        if self.orders != tuple(range(len(self.members))):
            out["orders"] = list(self.orders)
        return out


def jacobian_rank(coeff_map, lam0, k, h=1e-6):
    """Numerical rank of the ``k x dim(lambda)`` Jacobian of ``coeff_map``.

    Central differences with step ``h``; singular values below
    ``1e-8 * sigma_max`` count as zero.
    """
    lam0 = np.atleast_1d(np.asarray(lam0, dtype=float))

    def call(lam):
        try:
            out = np.asarray(coeff_map(lam), dtype=float).ravel()
        except Exception as exc:  # user callable
            raise EvaluationError(f"coefficient map failed at {lam.tolist()}: {exc}") from exc
        if out.size < k or not np.isfinite(out[:k]).all():
            raise EvaluationError(f"coefficient map gave {out.tolist()} at {lam.tolist()}")
        return out[:k]

    jac = np.empty((k, lam0.size))
    for j in range(lam0.size):
        step = np.zeros_like(lam0)
        step[j] = h
        jac[:, j] = (call(lam0 + step) - call(lam0 - step)) / (2 * h)
    sv = np.linalg.svd(jac, compute_uv=False)
    if sv.size == 0 or sv[0] == 0.0:
        return 0
    return int(np.sum(sv > 1e-8 * sv[0]))


def _scale_dir():
    return resources.files("epsorbit") / "data" / "scales"


def scale_names():
    return sorted(p.name[:-5] for p in _scale_dir().iterdir() if p.name.endswith(".json"))


def scale_from_json(obj):
    d = obj.get("d")
    members = [parse(t) for t in obj["members"]]
    return ChebyshevScale(members, d, obj.get("name", "scale"), obj.get("orders"))


def load_scale(name_or_path):
    """Load a shipped scale by name or a scale JSON file by path."""
    p = Path(str(name_or_path))
    if p.suffix == ".json" or p.exists():
        text = p.read_text()
    else:
        res = _scale_dir() / f"{name_or_path}.json"
        if not res.is_file():
            raise DataError(f"unknown scale {name_or_path!r}; shipped: {', '.join(scale_names())}")
        text = res.read_text()
    return scale_from_json(json.loads(text))
