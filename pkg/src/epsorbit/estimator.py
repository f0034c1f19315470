"""Growth classification of neighborhood lengths against a scale.

For every invertible member ``u_i`` the ratio ``r(eps) = |A_eps| / u_i^{-1}(eps)``
is classified from finite samples:

* comparable: ``max r / min r <= r_band`` and the least-squares slope of
  ``log r`` against ``log(-log eps)`` is at most ``tau`` in magnitude;
* diverges / vanishes: ``r`` at the smallest eps over ``r`` at the largest
  is at least ``factor`` (or at most ``1/factor``);
* indeterminate otherwise (the sign of the trend is kept).

The critical order is the unique comparable member, provided the verdicts
read "diverges ... comparable ... vanishes".
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from .errors import DataError, InsufficientData, OutOfRange
from .expr import Const, Expression
from .neighborhood import EpsilonProfile, eps_grid, profile
from .orbit import LazyOrbit, auto_x0
from .scales import ChebyshevScale, invert, jacobian_rank

__all__ = [
    "Thresholds",
    "ComparabilityVerdict",
    "OrderReport",
    "classify",
    "classify_ratio",
    "critical_order",
    "box_dimension",
    "ratio_band",
    "certify",
    "differentiation_shift",
    "analyze",
    "plot_data",
]

COMPARABLE = "comparable"
DIVERGES = "diverges"
VANISHES = "vanishes"
INDETERMINATE = "indeterminate"
BEYOND = "beyond scale"


@dataclass(frozen=True)
class Thresholds:
    r_band: float = 10.0
    tau: float = 0.1
    factor: float = 5.0


@dataclass
class ComparabilityVerdict:
    index: int
    order: object
    member: str
    verdict: str
    band: tuple
    slope: float
    growth: float
    trend: int
    ratios: list = field(repr=False, default_factory=list)

    def to_dict(self):
        d = asdict(self)
        d["band"] = list(self.band)
        return d


@dataclass
class OrderReport:
    scale: str
    verdicts: list
    m: object
    m_index: object
    dim_B: object
    dim_B_stderr: object
    dim_GB: object
    bound: object
    bound_kind: str
    thresholds: Thresholds
    grid: dict
    flags: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)

    @property
    def indeterminate(self):
        return self.m == INDETERMINATE

    def to_dict(self):
        return {
            "scale": self.scale,
            "verdicts": [v.to_dict() for v in self.verdicts],
            "m": self.m,
            "m_index": self.m_index,
            "dim_B": self.dim_B,
            "dim_B_stderr": self.dim_B_stderr,
            "dim_GB": self.dim_GB,
            "bound": self.bound,
            "bound_kind": self.bound_kind,
            "thresholds": asdict(self.thresholds),
            "grid": self.grid,
            "flags": list(self.flags),
            "diagnostics": list(self.diagnostics),
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def classify_ratio(eps, r, th=Thresholds()):
    """Verdict, band, slope, growth factor and trend sign of a ratio sample."""
    eps = np.asarray(eps, dtype=float)
    r = np.asarray(r, dtype=float)
    if eps.size < 3 or not (r > 0).all() or not np.isfinite(r).all():
        return INDETERMINATE, (float(np.min(r)), float(np.max(r))), math.nan, math.nan, 0
    order = np.argsort(eps)[::-1]
    eps, r = eps[order], r[order]
    band = (float(r.min()), float(r.max()))
    slope = float(stats.linregress(np.log(-np.log(eps)), np.log(r)).slope)
    growth = float(r[-1] / r[0])
    trend = 1 if growth > 1 else (-1 if growth < 1 else 0)
    if band[1] / band[0] <= th.r_band and abs(slope) <= th.tau:
        verdict = COMPARABLE
    elif growth >= th.factor:
        verdict = DIVERGES
    elif growth <= 1.0 / th.factor:
        verdict = VANISHES
    else:
        verdict = INDETERMINATE
    return verdict, band, slope, growth, trend


def ratio_band(prof, e):
    """``max/min`` of ``|A_eps| / e^{-1}(eps)`` over the profile."""
    r = prof.total / invert(e, prof.eps)
    return float(r.max() / r.min())


def _invertible(scale):
    first = 0 if not isinstance(scale.members[0].node, Const) else 1
    return list(range(first, len(scale.members)))


def classify(prof, scale, i, th=Thresholds()):
    inv = invert(scale.members[i], prof.eps)
    r = prof.total / inv
    verdict, band, slope, growth, trend = classify_ratio(prof.eps, r, th)
    return ComparabilityVerdict(i, scale.label(i), str(scale.members[i]), verdict,
                                band, slope, growth, trend, r.tolist())


def _direction(v):
    if v.verdict == DIVERGES:
        return 1
    if v.verdict == VANISHES:
        return -1
    if v.verdict == INDETERMINATE:
        return v.trend
    return 0


def _pairwise(prof, scale, idx):
    out = []
    invs = {i: invert(scale.members[i], prof.eps) for i in idx}
    for a in idx:
        for b in idx:
            if a < b:
                q = invs[a] / invs[b]
                out.append({"pair": [a, b], "min": float(q.min()), "max": float(q.max()),
                            "band": float(q.max() / q.min())})
    return out


def critical_order(prof, scale, th=Thresholds()):
    idx = _invertible(scale)
    verdicts, notes = [], []
    for i in idx:
        try:
            verdicts.append(classify(prof, scale, i, th))
        except OutOfRange as exc:
            notes.append(f"member {i} not invertible on the grid: {exc}")
            verdicts.append(ComparabilityVerdict(i, scale.label(i), str(scale.members[i]),
                                                 INDETERMINATE, (math.nan, math.nan),
                                                 math.nan, math.nan, 0))
    flags = []
    comps = [k for k, v in enumerate(verdicts) if v.verdict == COMPARABLE]
    dirs = [_direction(v) for v in verdicts]
    m = m_index = INDETERMINATE
    if len(comps) == 1:
        k = comps[0]
        before_ok = all(d > 0 for d in dirs[:k])
        after_ok = all(d < 0 for d in dirs[k + 1:])
        if before_ok and after_ok:
            m_index = verdicts[k].index
            m = scale.label(m_index)
            if any(v.verdict == INDETERMINATE for v in verdicts):
                flags.append("inferred")
                notes.append("neighbouring indeterminate verdicts agree with the trend direction")
        else:
            notes.append("verdicts do not read diverges..comparable..vanishes")
    elif len(comps) > 1:
        notes.append(f"several comparable members: {[verdicts[k].index for k in comps]}")
    elif all(v.verdict == DIVERGES for v in verdicts):
        m = m_index = BEYOND
    else:
        lin = _linear_regime(prof, th)
        if lin is not None and all(d < 0 for d in dirs[1:]) and dirs and dirs[0] >= 0:
            m_index = verdicts[0].index
            m = scale.label(m_index)
            flags.append("linear regime")
            notes.append(f"|A_eps| / (eps (-log eps)) is comparable (band {lin:.3g})")
        else:
            notes.append("no comparable member")
    if m == INDETERMINATE:
        flags.append("indeterminate")
        notes.append({"pairwise_inverse_ratios": _pairwise(prof, scale, idx)})
    try:
        dim_b, se = box_dimension(prof)
    except InsufficientData as exc:
        dim_b = se = None
        notes.append(str(exc))
    numeric = isinstance(m, (int, float)) and not isinstance(m, bool)
    dim_gb = 1.0 - 1.0 / m if numeric and m > 0 else None
    return OrderReport(scale.name, verdicts, m, m_index, dim_b, se, dim_gb,
                       m if numeric else None, "<=", th, dict(prof.grid), flags, notes)


def _linear_regime(prof, th):
    r = prof.total / (prof.eps * -np.log(prof.eps))
    verdict, band, *_ = classify_ratio(prof.eps, r, th)
    return band[1] / band[0] if verdict == COMPARABLE else None


def certify(report, coeff_map, lam0, h=1e-6):
    """Upgrade the bound to an equality when the coefficient map has full rank."""
    if not isinstance(report.bound, int):
        return report
    k = report.bound
    rank = jacobian_rank(coeff_map, lam0, k, h)
    report.diagnostics.append(f"jacobian rank {rank} for k = {k}")
    if rank == k:
        report.bound_kind = "="
    return report


def box_dimension(prof):
    """``1 - slope`` of ``log|A|`` against ``log eps`` on the small-eps half."""
    if len(prof) < 8:
        raise InsufficientData(f"need at least 8 rows, got {len(prof)}")
    span = math.log10(prof.eps.max() / prof.eps.min())
    if span < 3.0 - 1e-9:
        raise InsufficientData(f"need at least 3 decades, got {span:.3g}")
    order = np.argsort(prof.eps)
    keep = order[: math.ceil(len(prof) / 2)]
    fit = stats.linregress(np.log(prof.eps[keep]), np.log(prof.total[keep]))
    return 1.0 - float(fit.slope), float(fit.stderr)


def analyze(f, scale, x0=None, eps_max=1e-2, eps_min=1e-9, ppd=8, th=Thresholds(),
            n_max=5_000_000):
    """Orbit, profile and order report for ``g = id - f``."""
    if x0 is None:
        x0 = auto_x0(f)
    lazy = LazyOrbit.from_map(f, x0, n_max)
    prof = profile(lazy, eps_max, eps_min, ppd)
    return critical_order(prof, scale, th), prof


def derived_scale(scale):
    """``D_1(I) = {D_1(u_1), ..., D_1(u_l)}`` with orders shifted down by one."""
    members = [scale.D(1, u) for u in scale.members[1:]]
    for k, m in enumerate(members):
        members[k] = Expression(m.node, max(min(scale.members[k + 1].d, 1.0), scale.d))
    orders = [o - 1 for o in scale.orders[1:]]
    return ChebyshevScale(members, scale.d, f"D1({scale.name})", orders)


def differentiation_shift(f, scale, x0=None, eps_max=1e-2, eps_min=1e-9, ppd=8,
                          th=Thresholds()):
    """Critical orders of ``g = id - f`` against ``I`` and ``h = id - c D_1(f)``
    against ``D_1(I)``; the positive factor ``c <= 1`` only keeps ``h`` a
    contraction and does not change the order."""
    if x0 is None:
        x0 = auto_x0(f)
    rep_g, _ = analyze(f, scale, x0, eps_max, eps_min, ppd, th)
    d1s = derived_scale(scale)
    df = scale.D(1, f)
    df = Expression(df.node, f.d)
    xs = np.geomspace(min(1e-9, x0 / 10), x0, 400)
    top = float(np.max(df(xs) / xs))
    if not math.isfinite(top) or top <= 0:
        raise DataError(f"D_1(f) = {df} is not a positive contraction on (0, x0]")
    c = min(1.0, 0.5 / top)
    h = df * c if c < 1.0 else df
    rep_h, _ = analyze(h, d1s, x0, eps_max, eps_min, ppd, th)
    return rep_g.m, rep_h.m, rep_g, rep_h


def plot_data(prof, scale, path):
    """CSV with ``epsilon`` and one ratio column per invertible member."""
    idx = _invertible(scale)
    cols = [prof.eps]
    names = ["epsilon"]
    for i in idx:
        try:
            cols.append(prof.total / invert(scale.members[i], prof.eps))
        except OutOfRange:
            cols.append(np.full_like(prof.eps, np.nan))
        names.append(f"r_{i}")
    with open(path, "w") as fh:
        fh.write(",".join(names) + "\n")
        for row in zip(*(c.tolist() for c in cols)):
            fh.write(",".join(repr(v) for v in row) + "\n")


# re-exported for convenience
__all__ += ["eps_grid", "EpsilonProfile"]
