"""Return maps of planar vector fields on a transversal section.

The integrator is an embedded Dormand-Prince 5(4) pair with a fourth-order
dense output.  A crossing is detected by a sign change of the signed
distance to the section line (in the configured direction only) and refined
by bisection in time along the interpolant of the last step.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import (
    DataError,
    LeftDomain,
    NoCrossing,
    NotContracting,
    NotTransversal,
    StiffnessAbort,
)
from .expr import compile_many, parse
from .orbit import LazyOrbit, Orbit, REACHED_N_MAX, REACHED_X_MIN

__all__ = [
    "PlanarField",
    "Section",
    "Crossing",
    "integrate_to_section",
    "poincare_orbit",
    "poincare_map",
    "lazy_poincare_orbit",
    "load_field",
    "field_names",
]

# Dormand-Prince 5(4) tableau
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B = _A[6]
# fifth-order minus embedded fourth-order weights
_E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)
# dense output: y(t0 + s h) = y0 + h * sum_i k_i * (P_i . [s, s^2, s^3, s^4])
_P = (
    (1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432),
    (0.0, 0.0, 0.0, 0.0),
    (0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799),
    (0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072),
    (0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632),
    (0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844),
    (0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423),
)

SECTION_TOL = 1e-12
TRANSVERSAL_TOL = 1e-10


class PlanarField:
    """``x' = P(x, y), y' = Q(x, y)`` with parameters bound at construction."""

    def __init__(self, P, Q, params=None, box=(-5.0, 5.0, -5.0, 5.0), name="field"):
        self.params = dict(params or {})
        kw = dict(variables=("x", "y"), constants=self.params, allow_log=False)
        self.P = parse(P, **kw) if isinstance(P, str) else P
        self.Q = parse(Q, **kw) if isinstance(Q, str) else Q
        self.box = tuple(float(b) for b in box)
        self.name = name
        self._f = compile_many([self.P, self.Q])

    def __call__(self, x, y):
        return self._f(x, y)

    def inside(self, x, y):
        x0, x1, y0, y1 = self.box
        return x0 <= x <= x1 and y0 <= y <= y1

    def to_json(self):
        return {"name": self.name, "P": str(self.P), "Q": str(self.Q),
                "params": self.params, "box": list(self.box)}


@dataclass(frozen=True)
class Section:
    """The ray ``point + c * direction``, ``c > 0``.

    ``sign`` selects the crossing direction (sign of the field's component
    along the left normal of ``direction``); 0 means "take it from the
    starting velocity".
    """

    point: tuple = (0.0, 0.0)
    direction: tuple = (1.0, 0.0)
    sign: int = 0

    def __post_init__(self):
        dx, dy = (float(v) for v in self.direction)
        norm = math.hypot(dx, dy)
        if norm == 0.0:
            raise DataError("section direction must be nonzero")
        object.__setattr__(self, "direction", (dx / norm, dy / norm))
        object.__setattr__(self, "point", tuple(float(v) for v in self.point))

    @property
    def normal(self):
        dx, dy = self.direction
        return (-dy, dx)

    def at(self, c):
        return (self.point[0] + c * self.direction[0], self.point[1] + c * self.direction[1])

    def distance(self, x, y):
        nx, ny = self.normal
        return nx * (x - self.point[0]) + ny * (y - self.point[1])

    def coordinate(self, x, y):
        dx, dy = self.direction
        return dx * (x - self.point[0]) + dy * (y - self.point[1])


@dataclass(frozen=True)
class Crossing:
    point: tuple
    coordinate: float
    time: float
    steps: int
    h: float = field(default=0.0, compare=False)


def _dense(y0x, y0y, h, ks, s):
    s2 = s * s
    s3 = s2 * s
    s4 = s3 * s
    ax = ay = 0.0
    for (kx, ky), p in zip(ks, _P):
        w = p[0] * s + p[1] * s2 + p[2] * s3 + p[3] * s4
        ax += w * kx
        ay += w * ky
    return y0x + h * ax, y0y + h * ay


def integrate_to_section(fld, section, start, max_time=100.0, tol=1e-10, h0=None):
    """Integrate from ``start`` until the next same-direction crossing."""
    if not 1e-12 <= tol <= 1e-6:
        raise DataError(f"tolerance {tol!r} outside [1e-12, 1e-6]")
    F = fld._f
    x, y = (float(v) for v in start)
    if not fld.inside(x, y):
        raise LeftDomain(f"start ({x!r}, {y!r}) outside the box {fld.box}")
    nx, ny = section.normal
    k1 = F(x, y)
    sign = section.sign or (1 if nx * k1[0] + ny * k1[1] >= 0 else -1)
    atol = rtol = tol
    h = h0 if h0 else min(0.05, max_time)
    t = 0.0
    steps = 0
    s_prev = section.distance(x, y)
    while True:
        if t >= max_time:
            raise NoCrossing(f"no crossing within time {max_time!r}")
        h = min(h, max_time - t) if max_time - t > 0 else h
        if h < 1e-14 * max(1.0, t):
            raise StiffnessAbort(f"step size underflow at t = {t!r}")
        ks = [k1]
        for i in range(1, 7):
            row = _A[i]
            sx = x
            sy = y
            for a, (kx, ky) in zip(row, ks):
                sx += h * a * kx
                sy += h * a * ky
            ks.append(F(sx, sy))
        x1, y1 = sx, sy  # last stage is evaluated at the 5th-order solution
        ex = ey = 0.0
        for e, (kx, ky) in zip(_E, ks):
            ex += e * kx
            ey += e * ky
        ex *= h
        ey *= h
        scx = atol + rtol * max(abs(x), abs(x1))
        scy = atol + rtol * max(abs(y), abs(y1))
        err = math.sqrt(0.5 * ((ex / scx) ** 2 + (ey / scy) ** 2))
        if not math.isfinite(err):
            h *= 0.2
            continue
        if err > 1.0:
            h *= max(0.2, 0.9 * err ** -0.2)
            continue
        steps += 1
        s_new = section.distance(x1, y1)
        crossed = (s_prev * sign < 0.0 <= s_new * sign) if sign else False
        if crossed:
            lo, hi = 0.0, 1.0
            px, py = x1, y1
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                px, py = _dense(x, y, h, ks, mid)
                sm = section.distance(px, py)
                if abs(sm) <= SECTION_TOL:
                    break
                if sm * sign < 0.0:
                    lo = mid
                else:
                    hi = mid
            c = section.coordinate(px, py)
            if c > 0.0:
                vx, vy = F(px, py)
                if abs(nx * vx + ny * vy) <= TRANSVERSAL_TOL:
                    raise NotTransversal(f"field tangent to the section at ({px!r}, {py!r})")
                return Crossing((px, py), c, t + mid * h, steps, h)
        t += h
        x, y = x1, y1
        if not fld.inside(x, y):
            raise LeftDomain(f"trajectory left the box {fld.box} at t = {t!r}")
        k1 = ks[6]
        s_prev = s_new
        h *= min(10.0, 0.9 * err ** -0.2) if err > 0 else 10.0


def poincare_map(fld, section, max_time=100.0, tol=1e-10):
    """Return map in section coordinates; keeps the last step size warm."""
    state = {"h": None}

    def step(c):
        cr = integrate_to_section(fld, section, section.at(c), max_time, tol, state["h"])
        state["h"] = cr.h
        return cr.coordinate

    return step


def poincare_orbit(fld, section, x0, n_max=10_000, x_min=1e-9, max_time=100.0, tol=1e-10):
    """Successive same-direction crossings starting at coordinate ``x0``."""
    step = poincare_map(fld, section, max_time, tol)
    pts = [float(x0)]
    reason = REACHED_N_MAX
    while len(pts) < n_max:
        nxt = step(pts[-1])
        if not nxt < pts[-1]:
            raise NotContracting(
                f"crossing {nxt!r} does not decrease from {pts[-1]!r}", step=len(pts) - 1)
        pts.append(nxt)
        if nxt <= x_min:
            reason = REACHED_X_MIN
            break
    src = {"kind": "poincare", "field": fld.name, "x0": float(x0), "tol": tol}
    return Orbit(np.array(pts), src, reason)


def lazy_poincare_orbit(fld, section, x0, n_max=1_000_000, max_time=100.0, tol=1e-10):
    src = {"kind": "poincare", "field": fld.name, "x0": float(x0), "tol": tol}
    return LazyOrbit(poincare_map(fld, section, max_time, tol), x0, n_max, src, chunk=1000)


def _field_dir():
    return resources.files("epsorbit") / "data" / "fields"


def field_names():
    return sorted(p.name[:-5] for p in _field_dir().iterdir() if p.name.endswith(".json"))


def field_from_json(obj):
    fld = PlanarField(obj["P"], obj["Q"], obj.get("params"),
                      obj.get("box", (-5.0, 5.0, -5.0, 5.0)), obj.get("name", "field"))
    sec = obj.get("section") or {}
    section = Section(sec.get("point", (0.0, 0.0)), sec.get("direction", (1.0, 0.0)),
                      int(sec.get("sign", 0)))
    return fld, section


def load_field(name_or_path):
    """Shipped field by name, or a field JSON file; returns ``(field, section)``."""
    p = Path(str(name_or_path))
    if p.suffix == ".json" or p.exists():
        text = p.read_text()
    else:
        res = _field_dir() / f"{name_or_path}.json"
        if not res.is_file():
            raise DataError(f"unknown field {name_or_path!r}; shipped: {', '.join(field_names())}")
        text = res.read_text()
    return field_from_json(json.loads(text))
