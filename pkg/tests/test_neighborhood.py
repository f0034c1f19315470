import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from epsorbit.errors import DomainError, OrbitTooShort
from epsorbit.expr import parse
from epsorbit.neighborhood import (
    CSV_HEADER,
    EpsilonProfile,
    eps_grid,
    exact_length,
    length_at,
    profile,
    union_length,
)
from epsorbit.orbit import LazyOrbit, Orbit, generate


def brute_union(points, eps, fill):
    """Plain merge loop over intervals, kept independent of the sweep."""
    iv = [(max(x - eps, 0.0), x + eps) for x in points]
    if fill:
        iv.append((0.0, min(points) + eps))
    iv.sort()
    total, cur_lo, cur_hi = 0.0, None, None
    for lo, hi in iv:
        if cur_hi is None or lo > cur_hi:
            if cur_hi is not None:
                total += cur_hi - cur_lo
            cur_lo, cur_hi = lo, hi
        else:
            cur_hi = max(cur_hi, hi)
    return total + (cur_hi - cur_lo)


@pytest.fixture(scope="module")
def halving():
    return generate(parse("0.5*x"), 0.8, x_min=1e-6)


def test_large_eps_is_all_nucleus(halving):
    n, t, k, ex = length_at(halving, 0.3)
    assert (n, t, k) == (pytest.approx(1.1), 0.0, 0)
    assert ex == pytest.approx(1.1)


def test_gap_tie_joins_nucleus(halving):
    n, t, k, ex = length_at(halving, 0.05)
    assert k == 2
    assert n == pytest.approx(0.25) and t == pytest.approx(0.2)
    assert n + t == pytest.approx(0.45)
    assert ex == pytest.approx(brute_union(halving.points, 0.05, True)) == pytest.approx(0.45)


def test_single_point_orbit():
    with pytest.raises(OrbitTooShort) as err:
        length_at(Orbit(np.array([0.5])), 0.1)
    assert err.value.exact == pytest.approx(0.2)
    assert err.value.eps == 0.1


def test_grid_shapes():
    assert len(eps_grid(1e-2, 1e-8, 4)) == 25
    assert eps_grid(1e-3, 1e-3).tolist() == [1e-3]
    g = eps_grid(1e-2, 1e-9, 8)
    assert g[0] == 1e-2 and g[-1] == pytest.approx(1e-9) and (np.diff(g) < 0).all()
    with pytest.raises(DomainError):
        eps_grid(1e-3, 1e-2)


def test_quadratic_profile():
    f = parse("x^2")
    p = profile((f, 0.4), 1e-2, 1e-8, 4)
    assert len(p) == 25
    j = int(np.argmin(np.abs(np.log(p.eps / 1e-6))))
    assert 0.5e-3 <= p.total[j] <= 5e-3
    orb = generate(f, 0.4, n_max=int(p.source["points"]))
    assert p.exact[j] == pytest.approx(brute_union(orb.points, p.eps[j], True), rel=1e-9)


def test_linear_case_band():
    p = profile((parse("0.5*x"), 0.8), 1e-3, 1e-9, 8)
    r = p.total / (p.eps * -np.log(p.eps))
    assert r.max() / r.min() <= 3


def test_single_row_profile():
    p = profile((parse("x^2"), 0.4), 1e-4, 1e-4)
    assert len(p) == 1


def test_fixed_orbit_too_short():
    o = generate(parse("x^2"), 0.4, n_max=100)
    with pytest.raises(OrbitTooShort) as err:
        profile(o, 1e-2, 1e-8, 2)
    assert err.value.eps < 1e-2


def test_eps_max_below_x0():
    with pytest.raises(DomainError):
        profile((parse("x^2"), 0.4), 0.5, 1e-3)


@pytest.mark.parametrize("f", ["x^2", "x^3*(-log(x))", "0.5*x", "x^1.5/(-log(x))"])
def test_profile_invariants(f):
    x0 = 0.3
    p = profile((parse(f), x0), 1e-2, 1e-8, 6)
    assert np.allclose(p.total, p.nucleus + p.tail, rtol=1e-15)
    assert (p.total >= p.eps).all() and (p.total <= x0 + 2 * p.eps).all()
    assert (np.abs(p.exact - p.total) <= 2 * p.eps).all()
    assert (np.diff(p.n_eps) >= 0).all()  # eps decreases along the grid


def test_threads_do_not_change_results():
    lazy = LazyOrbit.from_map(parse("x^3"), 0.4)
    lazy.resolve(1e-8)
    orb = lazy.freeze()
    a = profile(orb, 1e-2, 1e-8, 8, threads=1)
    b = profile(orb, 1e-2, 1e-8, 8, threads=4)
    for col in ("total", "nucleus", "tail", "n_eps", "exact"):
        assert np.array_equal(getattr(a, col), getattr(b, col))


def test_thread_env(monkeypatch):
    from epsorbit.neighborhood import thread_count

    monkeypatch.setenv("EPSORBIT_THREADS", "3")
    assert thread_count() == 3


def test_export_round_trip(tmp_path):
    p = profile((parse("x^2"), 0.4), 1e-2, 1e-6, 4)
    p.to_csv(tmp_path / "p.csv")
    assert (tmp_path / "p.csv").read_text().splitlines()[0] == CSV_HEADER
    q = EpsilonProfile.from_csv(tmp_path / "p.csv")
    assert q.rows() == p.rows()
    p.to_json(tmp_path / "p.json")
    obj = json.loads((tmp_path / "p.json").read_text())
    assert obj["grid"] == {"eps_max": 1e-2, "eps_min": 1e-6, "ppd": 4}
    assert EpsilonProfile.from_json(tmp_path / "p.json").rows() == p.rows()


FAMILY = [f"x^{k}" for k in (2, 3, 4)] + [f"x^{k}*(-log(x))" for k in (2, 3, 4)]


# x^k (-log x) is increasing only below e^(-1/k); above that the gaps are not
# monotone and the nucleus/tail split does not apply
@given(st.floats(0.1, 0.6), st.sampled_from(FAMILY), st.integers(0, 2**31))
def test_nucleus_tail_agrees_with_union(x0, f, seed):
    e = parse(f, d=1.0)
    lazy = LazyOrbit.from_map(e, x0, n_max=200_000)
    eps_all = np.sort(np.random.default_rng(seed).uniform(np.log(1e-5), np.log(0.05), 20))
    eps_all = np.exp(eps_all)
    lazy.resolve(eps_all[0])
    orb = lazy.freeze()
    for eps in eps_all:
        n, t, k, ex = length_at(orb, eps)
        assert abs(n + t - ex) <= 2 * eps
        assert ex == pytest.approx(brute_union(orb.points, eps, True), rel=1e-9, abs=1e-15)


@given(st.lists(st.floats(0, 1), min_size=1, max_size=40), st.floats(1e-4, 0.3))
def test_union_sweep_matches_loop(xs, eps):
    xs = np.array(xs)
    assert union_length(np.maximum(xs - eps, 0), xs + eps) == pytest.approx(
        brute_union(xs.tolist(), eps, False), rel=1e-12, abs=1e-15)


@given(st.floats(0.01, 1.0), st.floats(1e-5, 1e-2))
def test_exact_length_scales_linearly(c, eps):
    orb = generate(parse("x^2"), 0.4, n_max=3000)
    base = exact_length(orb.points, eps)
    scaled = exact_length(orb.scaled(c).points, eps * c)
    assert scaled == pytest.approx(c * base, rel=1e-9)
