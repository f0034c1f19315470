import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, strategies as st

from epsorbit.errors import DomainError, NonFinite, NonPositive, ParseError
from epsorbit.expr import (
    X,
    Expression,
    differentiate,
    evaluate,
    log_derivative_range,
    parse,
)


def test_eval_examples():
    assert evaluate(parse("x^2"), 0.2) == pytest.approx(0.04, rel=1e-15)
    assert evaluate(parse("omega(x, 0)"), 0.1) == pytest.approx(math.log(10), rel=1e-15)
    assert evaluate(parse("omega(x, 1)"), 0.5) == pytest.approx(1.0, rel=1e-15)


def test_domain_and_nonfinite_errors():
    e = parse("x^2")
    for bad in (0.0, -0.1, 1.0, 2.0):
        with pytest.raises(DomainError):
            e.eval(bad)
    with pytest.raises(NonFinite):
        parse("1/(x - 0.25)").eval(0.25)


def test_default_domain():
    assert parse("x^2").d == 1.0
    assert parse("x*(-log(x))").d == pytest.approx(math.exp(-1))
    assert parse("omega(x, 0.2)").d == 1.0
    assert parse("omega(x, 0)").d == pytest.approx(math.exp(-1))
    assert parse("x^2", d=0.5).d == 0.5


def test_differentiate_examples():
    assert differentiate(parse("x^3")).eval(0.5) == pytest.approx(0.75, rel=1e-14)
    assert differentiate(parse("x*(-log(x))")).eval(math.exp(-2)) == pytest.approx(1.0, rel=1e-14)
    e = parse("exp(-1/x)")
    x, h = 0.1, 0.1 * 1e-5
    fd = (e.eval(x + h) - e.eval(x - h)) / (2 * h)
    assert differentiate(e).eval(x) == pytest.approx(fd, rel=1e-6)


SYMPY_CASES = [
    "x^2*(-log(x))",
    "x^1.5/(-log(x))",
    "exp(-1/(3*x))*x^2",
    "(x + x^3)/(1 + x)",
    "sqrt(x)*(-log(x))^3",
    "x/(-log(x)) - x^4",
    "exp(-1/x)",
    "exp(-0.01/x)*(-log(x))",
    "x^3/exp(-0.001/x) + exp(2*x)",
    "exp(x^2*(-log(x)))",
]


@pytest.mark.parametrize("text", SYMPY_CASES)
def test_derivative_matches_sympy(text):
    xs = sp.Symbol("x", positive=True)
    ref = sp.lambdify(xs, sp.diff(sp.sympify(text.replace("^", "**"), locals={"x": xs}), xs))
    d = parse(text).diff()
    for x in np.geomspace(1e-4, 0.3, 17):
        assert d.eval(x) == pytest.approx(float(ref(x)), rel=1e-10)


# -- generated expressions ---------------------------------------------------
# Positive increasing (inc) and positive decreasing (dec) functions on
# (0, 1/e), combined so that the derivative never vanishes.

def _monomial(a, b):
    return X ** a * parse("-log(x)") ** b if b else X ** a


# Exponential nodes are checked against sympy above: with step x*1e-5 the
# central difference of exp(-c/x) is either truncation- or roundoff-limited
# somewhere on [1e-6, d/2].
_inc_base = st.one_of(
    st.builds(_monomial, st.sampled_from([1.0, 1.5, 2.0, 3.0]), st.sampled_from([0, 1])),
)
_dec_base = st.one_of(
    st.builds(lambda a: parse(f"omega(x, {a!r})"), st.sampled_from([-0.5, -0.1, 0.0, 0.3, 1.0])),
    st.just(parse("-log(x)")),
)


def _extend(children):
    inc, dec = children
    return st.one_of(
        st.builds(lambda a, b: a + b, inc, inc),
        st.builds(lambda a, b: a * b, inc, inc),
        st.builds(lambda a, b: a / b, inc, dec),
        st.builds(lambda c, a: c * a, st.floats(0.1, 10), inc),
    ), st.one_of(
        st.builds(lambda a, b: a + b, dec, dec),
        st.builds(lambda a, b: a * b, dec, dec),
        st.builds(lambda a, b: a / b, dec, inc),
    )


def _trees(depth):
    inc, dec = _inc_base, _dec_base
    for _ in range(depth):
        inc, dec = _extend((inc, dec))
    return st.one_of(inc, dec)


monotone_exprs = st.integers(0, 2).flatmap(_trees)
points = st.floats(math.log(1e-6), math.log(math.exp(-1) / 2)).map(math.exp)


@given(monotone_exprs, points)
def test_derivative_matches_central_difference(e, x):
    h = x * 1e-5
    fd = (e.eval(x + h) - e.eval(x - h)) / (2 * h)
    d = e.diff().eval(x)
    assert d == pytest.approx(fd, rel=1e-6)


@given(monotone_exprs, points)
def test_text_round_trip(e, x):
    again = parse(str(e), d=e.d)
    assert again.eval(x) == pytest.approx(e.eval(x), rel=1e-12)


@given(monotone_exprs)
def test_compiled_matches_tree(e):
    fc = e.compile()
    for x in (1e-5, 1e-3, 0.1):
        assert fc(x) == pytest.approx(e(x), rel=1e-12)


@given(st.floats(-1e-4, 1e-4), st.floats(math.log(1e-6), math.log(0.5)).map(math.exp))
def test_compensator_continuity(alpha, x):
    w = parse(f"omega(x, {alpha!r})", d=1.0).eval(x)
    assert abs(w + math.log(x)) <= 10 * abs(alpha) * math.log(x) ** 2 + 1e-14 * abs(math.log(x))


@given(st.floats(0.1, 40), st.integers(0, 6), st.floats(-300, math.log10(math.exp(-1))))
def test_log_domain_monomials_positive(a, b, lx):
    x = 10.0 ** lx
    e = X ** a * parse("-log(x)") ** b
    s, lg = e.log_abs(np.array([x]))
    assert s[0] > 0 and np.isfinite(lg[0])
    assert lg[0] == pytest.approx(a * math.log(x) + b * math.log(-math.log(x)), rel=1e-12, abs=1e-12)


def test_omega_large_argument_is_finite():
    e = parse("omega(x, 2)")
    s, lg = e.log_abs(np.array([1e-300]))
    assert s[0] > 0 and lg[0] == pytest.approx(600 * math.log(10) - math.log(2), rel=1e-12)


def test_log_derivative_range_power():
    r = log_derivative_range(parse("x^2"), 1e-8, 0.5, 100)
    assert r.m == pytest.approx(2.0, rel=1e-12) and r.M == pytest.approx(2.0, rel=1e-12)
    assert r.sublinear and r.upper_power_ok


def test_log_derivative_range_log_corrected():
    # x (log e)' = 2 - 1/(-log x): smallest at the upper end of the range
    r = log_derivative_range(parse("x^2*(-log(x))"), 1e-8, 0.1, 200)
    assert r.m == pytest.approx(2 - 1 / math.log(10), rel=1e-9)
    assert r.M == pytest.approx(2 - 1 / (8 * math.log(10)), rel=1e-9)
    assert r.M < 2 and r.sublinear and r.upper_power_ok


def test_log_derivative_range_flat():
    r = log_derivative_range(parse("exp(-1/x)", d=1.0), 1e-4, 0.5, 200)
    assert r.M == pytest.approx(1e4, rel=1e-9)
    assert not r.upper_power_ok


def test_log_derivative_range_nonpositive():
    with pytest.raises(NonPositive):
        log_derivative_range(parse("x - 0.25"), 1e-3, 0.5, 50)


@pytest.mark.parametrize(
    "text, offset",
    [("x^", 2), ("x + $", 4), ("2*(x", 4), ("foo(x)", 0), ("x^x", 1), ("omega(x, x)", 0),
     ("y + x", 0), ("x x", 2)],
)
def test_parse_errors_report_offset(text, offset):
    with pytest.raises(ParseError) as err:
        parse(text)
    assert err.value.offset == offset
    assert f"byte {offset}" in str(err.value)


def test_parse_syntax_variants():
    assert parse("x**2").eval(0.3) == pytest.approx(0.09)
    assert parse("-x^2 + 1").eval(0.5) == pytest.approx(0.75)
    assert parse("2^-1*x").eval(0.5) == pytest.approx(0.25)
    assert parse("ln(x) + log(x)").eval(0.3) == pytest.approx(2 * math.log(0.3))
    assert parse("a*x", constants={"a": 3}).eval(0.1) == pytest.approx(0.3)
    assert parse("x*y", variables=("x", "y"))(0.5, y=4.0) == pytest.approx(2.0)


def test_structural_equality_and_arithmetic():
    assert parse("x^2") == X * X
    assert parse("x/x") == Expression(1.0)
    assert hash(parse("x^2 + 1")) == hash(parse("x^2 + 1"))
    e = (X + 1) * 2 - X / 2
    assert e.eval(0.5) == pytest.approx(2.75)
    assert (1 / X).eval(0.25) == pytest.approx(4.0)


def test_vectorised_evaluation():
    xs = np.geomspace(1e-300, 0.3, 50)
    v = parse("x^0.5*(-log(x))")(xs)
    assert v.shape == xs.shape and (v > 0).all()
