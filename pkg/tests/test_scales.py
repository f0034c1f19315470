import json
import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, strategies as st

from epsorbit.errors import DataError, DegenerateScale, EvaluationError, OutOfRange
from epsorbit.expr import parse
from epsorbit.scales import (
    ChebyshevScale,
    invert,
    jacobian_rank,
    load_scale,
    scale_names,
    stabilized_limit,
)


def scale(*texts, d=None):
    return ChebyshevScale([parse(t) for t in texts], d)


SHIPPED = ["power", "odd_power", "loop", "two_sided_log", "two_cycle", "abelian"]


def test_shipped_scale_names():
    assert set(SHIPPED + ["flat_counterexample"]) <= set(scale_names())


@pytest.mark.parametrize("name", SHIPPED)
def test_shipped_scales_validate(name):
    rep = load_scale(name).validate()
    assert rep.ok, str(rep)


def test_flat_scale_fails_validation():
    rep = load_scale("flat_counterexample").validate()
    assert not rep.passed("flatness")
    assert not rep.passed("derivative_increasing")


def test_validate_examples():
    assert scale("1", "x", "x^2", "x^3").validate().ok
    assert scale("1", "x*(-log(x))", "x", "x^2*(-log(x))", "x^2", d=0.03).validate().ok
    rep = scale("1", "x", "x*(-log(x))").validate()
    flat = [f for f in rep.failures if f.axiom == "flatness"]
    assert [f.indices for f in flat] == [(1, 2)]
    assert rep.checked[(1, 2)] == "diverges"


def test_validate_reports_nonmonotone_member():
    rep = scale("1", "x", "x - x^2").validate()
    assert rep.passed("positive")
    assert not rep.passed("increasing")


def _sympy_D(members, f, i):
    """Independent division-differentiation on sympy expressions."""
    x = sp.Symbol("x", positive=True)
    us = [sp.sympify(m.replace("^", "**"), locals={"x": x}) for m in members]
    g = sp.sympify(f.replace("^", "**"), locals={"x": x})

    def D(k, h):
        if k == 0:
            return h / us[0]
        return sp.diff(D(k - 1, h), x) / sp.diff(D(k - 1, us[k]), x)

    return sp.limit(sp.simplify(D(i, g)), x, 0, "+")


def test_generalized_derivative_examples():
    s = scale("1", "x", "x^2")
    expected = float(_sympy_D(["1", "x", "x^2"], "3*x^2", 2))
    assert expected == 3.0
    assert s.generalized_derivative(parse("3*x^2"), 2).value == pytest.approx(expected, rel=1e-12)
    s = scale("1", "x*(-log(x))", "x")
    assert s.generalized_derivative(parse("x*(-log(x))"), 1).value == 1.0
    assert scale("1", "x").generalized_derivative(parse("2*x"), 1).value == pytest.approx(2.0)


def test_generalized_derivative_log_scale_matches_sympy():
    members = ["1", "x*(-log(x))", "x", "x^2*(-log(x))", "x^2"]
    s = scale(*members, d=0.03)
    f = "0.5*x + 3*x^2*(-log(x))"
    for i in range(5):
        got = s.generalized_derivative(parse(f), i).value
        ref = _sympy_D(members, f, i)
        assert got == pytest.approx(float(ref), rel=1e-6, abs=1e-12)


def test_logarithmically_slow_limits_are_indeterminate():
    # D_3 tends to 3, but the x^2 term contributes O(1/(-log x)), which the
    # three-sample agreement test cannot resolve on the 1e-1..1e-12 grid
    s = scale("1", "x*(-log(x))", "x", "x^2*(-log(x))", "x^2", d=0.03)
    f = parse("0.5*x + 3*x^2*(-log(x)) - x^2")
    assert float(_sympy_D([str(m) for m in s.members], str(f), 3)) == 3.0
    assert s.generalized_derivative(f, 3).value == "indeterminate"


def test_generalized_derivative_samples_and_grid():
    g = load_scale("power").generalized_derivative(parse("x^2 + x^3"), 2)
    xs = [p[0] for p in g.samples]
    assert len(xs) == 12 and xs[0] == pytest.approx(0.1) and xs[-1] == pytest.approx(1e-12)
    assert g.value == pytest.approx(1.0, rel=1e-9)


@pytest.mark.parametrize("name", SHIPPED)
def test_D_i_of_u_i_is_one(name):
    s = load_scale(name)
    for i, u in enumerate(s.members):
        assert s.generalized_derivative(u, i).value == pytest.approx(1.0, rel=1e-12)


coeff = st.one_of(st.just(0.0), st.floats(0.01, 10), st.floats(-10, -0.01))


@given(st.lists(coeff, min_size=1, max_size=7))
def test_power_scale_recovers_taylor_coefficients(a):
    s = load_scale("power")
    f = parse(" + ".join(f"({c!r})*x^{j}" for j, c in enumerate(a)), d=1.0)
    for i in range(len(s.members)):
        want = a[i] if i < len(a) else 0.0
        got = s.generalized_derivative(f, i).value
        assert got == pytest.approx(want, rel=1e-6, abs=1e-300)


def test_degenerate_scale():
    s = ChebyshevScale([parse("1"), parse("x^2 - x^2 + 1 - 1 + x"), parse("x^2")])
    s2 = ChebyshevScale([parse("1"), parse("0.5"), parse("x")], d=1.0)
    with pytest.raises(DegenerateScale):
        s2.generalized_derivative(parse("x"), 1)
    assert s.generalized_derivative(parse("x^2"), 2).value == pytest.approx(1.0)


def test_invert_member_examples():
    assert load_scale("power").invert_member(2, 0.04) == pytest.approx(0.2, rel=1e-14)
    assert load_scale("two_sided_log").invert_member(1, 0.2302585) == pytest.approx(0.1, rel=1e-6)
    fl = load_scale("flat_counterexample")
    x = fl.invert_member(2, math.exp(-10))
    assert x == pytest.approx(1 / 30, rel=1e-13)


def test_invert_out_of_range():
    with pytest.raises(OutOfRange):
        load_scale("power").invert_member(2, 1.0)
    with pytest.raises(OutOfRange):
        invert(parse("x^2"), -1.0)


@pytest.mark.parametrize("name", SHIPPED + ["flat_counterexample"])
def test_invert_round_trip(name):
    s = load_scale(name)
    for i, u in enumerate(s.members):
        if u.node.__class__.__name__ == "Const":
            continue
        top = u(math.nextafter(u.d, 0))
        ys = np.geomspace(1e-12 * top, 0.5 * top, 25)
        xs = invert(u, ys)
        got = u(xs)
        tol = np.maximum(1e-14, 1e-10 * ys)
        assert (np.abs(got - ys) <= tol).all()


def test_multiplicity_bound_examples():
    s = scale("1", "x*(-log(x))", "x", "x^2*(-log(x))", "x^2", d=0.03)
    mb = s.multiplicity_bound(parse("0.5*x"))
    assert mb.k0 == 2 and mb.bound == 2 and mb.values[:3] == (0.0, 0.0, 0.5)
    assert load_scale("power").multiplicity_bound(parse("x^3")).k0 == 3
    fl = load_scale("flat_counterexample").multiplicity_bound(parse("exp(-1/(3*x))", d=1.0))
    assert fl.k0 == 2
    assert fl.values[2] == pytest.approx(1.0)
    assert any("diverges" in n for n in fl.notes)


def test_multiplicity_beyond_scale():
    mb = scale("1", "x", "x^2").multiplicity_bound(parse("x^5"))
    assert mb.k0 == "beyond scale"


def test_jacobian_rank_examples():
    assert jacobian_rank(lambda lam: lam, [0.1, 0.2, 0.3], 3) == 3
    assert jacobian_rank(lambda lam: (lam[0], lam[0]), [0.0, 0.0], 2) == 1
    assert jacobian_rank(lambda lam: (lam[0], lam[1] ** 2), [0.0, 0.0], 2) == 1
    assert jacobian_rank(lambda lam: (lam[0], lam[1] ** 2), [0.0, 0.5], 2) == 2


def test_jacobian_rank_propagates_failures():
    def bad(lam):
        raise ValueError("boom")

    with pytest.raises(EvaluationError):
        jacobian_rank(bad, [0.0], 1)


def test_stabilized_limit_rules():
    xs = 10.0 ** -np.arange(1, 13)
    assert stabilized_limit(3 + xs) == pytest.approx(3.0)
    assert stabilized_limit(-np.log(xs)) == "diverges"
    assert stabilized_limit(1 / xs) == "diverges"
    assert stabilized_limit(xs) == 0.0
    assert stabilized_limit(1 / (-np.log(xs))) == 0.0
    assert stabilized_limit(np.sin(np.arange(12.0))) == "indeterminate"
    assert stabilized_limit(np.full(12, 1e-20)) == pytest.approx(1e-20)


def test_equivalent_functions_have_equivalent_inverses():
    ys = np.geomspace(1e-10, 1e-2, 41)
    for c in (0.5, 0.8, 1.5, 2.0):
        r = invert(parse(f"{c}*x^2*(-log(x))"), ys) / invert(parse("x^2*(-log(x))"), ys)
        assert r.max() / r.min() <= 2.0


def test_ordered_functions_have_ordered_inverses():
    ys = np.geomspace(1e-10, 1e-2, 41)[::-1]
    r = invert(parse("x^2"), ys) / invert(parse("x^3"), ys)
    assert (np.diff(r) < 0).all() and r[-1] < 0.05


def test_scale_json_file(tmp_path):
    p = tmp_path / "mine.json"
    p.write_text(json.dumps({"name": "mine", "d": 0.5, "members": ["1", "x", "x^3"]}))
    s = load_scale(p)
    assert s.name == "mine" and s.d == 0.5 and len(s) == 3
    assert load_scale("odd_power").label(1) == 3
    with pytest.raises(DataError):
        load_scale("no_such_scale")
