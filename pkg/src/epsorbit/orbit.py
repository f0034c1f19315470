"""Orbits of ``g = id - f`` accumulating at the fixed point 0."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DomainError,
    NotContracting,
    NotDecreasing,
    NonPositive,
    ParseError,
)
from .expr import Expression

__all__ = [
    "Orbit",
    "LazyOrbit",
    "generate",
    "import_csv",
    "check_contracting",
    "auto_x0",
    "REACHED_X_MIN",
    "REACHED_N_MAX",
    "FIXED_POINT",
]

REACHED_X_MIN = "reached x_min"
REACHED_N_MAX = "reached n_max"
FIXED_POINT = "fixed-point hit"

DEFAULT_X_MIN = 1e-9
DEFAULT_N_MAX = 5_000_000
CHUNK = 100_000


@dataclass(frozen=True)
class Orbit:
    """Strictly decreasing positive sequence plus where it came from."""

    points: np.ndarray
    source: dict = field(default_factory=dict)
    truncation: str = ""

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 1 or pts.size == 0:
            raise ValueError("an orbit needs at least one point")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return self.points.size

    @property
    def x0(self):
        return float(self.points[0])

    @property
    def gaps(self):
        return -np.diff(self.points)

    def scaled(self, c):
        return Orbit(self.points * c, dict(self.source, scaled=c), self.truncation)

    def to_csv(self, path):
        with open(path, "w") as fh:
            for x in self.points.tolist():
                fh.write(f"{x!r}\n")


def check_contracting(f, x0, x_min=DEFAULT_X_MIN, n=1000):
    """Sampled check of ``0 < f(x) < x`` on ``[x_min, x0]``.

    ``f(x) == 0`` is accepted where it is only floating-point underflow
    (flat functions such as ``exp(-1/x)``).
    """
    xs = np.geomspace(min(x_min, x0), x0, n)
    s, lg = f.log_abs(xs)
    bad = ~((s > 0) & (lg < np.log(xs)))
    if bad.any():
        x = float(xs[np.nonzero(bad)[0][-1]])
        raise NotContracting(f"0 < f(x) < x fails for f = {f} at x = {x!r}")


def auto_x0(f, x_min=DEFAULT_X_MIN):
    """Largest ``x0 = min(0.3, 0.9 d) / 2**k`` passing the sampled check."""
    x0 = min(0.3, 0.9 * f.d)
    for _ in range(60):
        try:
            check_contracting(f, x0, x_min)
            return x0
        except NotContracting:
            x0 /= 2.0
    raise NotContracting(f"no starting point found for f = {f}")


def _iterate(fc, x, count, x_min, start_index=0):
    """Up to ``count`` further points after ``x``; returns (points, reason)."""
    out = []
    append = out.append
    try:
        for k in range(count):
            fx = fc(x)
            if fx == x and x > 0.0:
                # x - f(x) is below the rounding of x: the orbit has reached 0
                return out, FIXED_POINT
            if not (fx < x):
                raise NotContracting(
                    f"f(x_n) = {fx!r} >= x_n = {x!r}", step=start_index + k)
            if fx <= 0.0:
                if fx == 0.0:
                    return out, FIXED_POINT
                raise NotContracting(
                    f"f(x_n) = {fx!r} <= 0 at x_n = {x!r}", step=start_index + k)
            nx = x - fx
            if nx >= x:
                return out, FIXED_POINT
            append(nx)
            x = nx
            if x <= x_min:
                return out, REACHED_X_MIN
    except (ValueError, ZeroDivisionError, OverflowError, TypeError) as exc:
        raise NotContracting(f"f not evaluable at x = {x!r}: {exc}",
                             step=start_index + len(out)) from exc
    return out, REACHED_N_MAX


def generate(f, x0, x_min=DEFAULT_X_MIN, n_max=DEFAULT_N_MAX):
    """Orbit ``x_{n+1} = x_n - f(x_n)`` until ``x_n <= x_min`` or ``n_max`` points."""
    x0 = float(x0)
    if not 0.0 < x0 < f.d:
        raise DomainError(f"x0 = {x0!r} outside (0, {f.d!r})")
    if not 0.0 < x_min < x0:
        raise DomainError(f"need 0 < x_min < x0, got x_min = {x_min!r}")
    fc = f.compile()
    try:
        f0 = fc(x0)
    except (ValueError, ZeroDivisionError, OverflowError) as exc:
        raise NotContracting(f"f not evaluable at x0: {exc}", step=0) from exc
    if not 0.0 < f0 < x0:
        raise NotContracting(f"f(x0) = {f0!r} not in (0, x0)", step=0)
    check_contracting(f, x0, x_min)
    pts, reason = _iterate(fc, x0, int(n_max) - 1, x_min, 0)
    source = {"kind": "generated", "f": str(f), "x0": x0, "x_min": x_min, "n_max": int(n_max)}
    return Orbit(np.array([x0] + pts), source, reason)


class LazyOrbit:
    """An orbit extended on demand, in chunks, from a step function.

    ``step`` maps a point to the next one (or raises).  Used both for
    ``g = id - f`` and for Poincare return maps.
    """

    def __init__(self, step, x0, n_max=DEFAULT_N_MAX, source=None, chunk=CHUNK):
        self._step = step
        self._chunks = [np.array([float(x0)])]
        self._cache = None
        self.n_max = int(n_max)
        self.chunk = int(chunk)
        self.source = source or {}
        self.truncation = ""

    @classmethod
    def from_map(cls, f, x0, n_max=DEFAULT_N_MAX):
        check_contracting(f, x0)
        fc = f.compile()
        src = {"kind": "generated", "f": str(f), "x0": float(x0), "n_max": int(n_max)}
        obj = cls(None, x0, n_max, src)
        obj._fc = fc
        return obj

    def __len__(self):
        return sum(c.size for c in self._chunks)

    @property
    def points(self):
        if self._cache is None or self._cache.size != len(self):
            self._cache = np.concatenate(self._chunks)
        return self._cache

    @property
    def last(self):
        return float(self._chunks[-1][-1])

    def last_gap(self):
        p = self.points
        return float(p[-2] - p[-1]) if p.size > 1 else math.inf

    def extend(self):
        """Add one chunk. Returns False once the orbit cannot grow."""
        if self.truncation:
            return False
        room = min(self.chunk, self.n_max - len(self))
        if room <= 0:
            self.truncation = REACHED_N_MAX
            return False
        if self._step is None:
            pts, reason = _iterate(self._fc, self.last, room, 0.0, len(self) - 1)
            if reason != REACHED_N_MAX:
                self.truncation = reason
        else:
            pts = []
            x = self.last
            for _ in range(room):
                nx = self._step(x)
                if not (0.0 < nx < x):
                    if nx == x:
                        self.truncation = FIXED_POINT
                        break
                    raise NotContracting(f"next point {nx!r} does not decrease from {x!r}",
                                         step=len(self) + len(pts) - 1)
                pts.append(nx)
                x = nx
        if pts:
            self._chunks.append(np.asarray(pts, dtype=float))
        return bool(pts) and not self.truncation

    def resolve(self, eps):
        """Extend until the last gap is at most ``2 eps`` (if possible)."""
        while self.last_gap() > 2.0 * eps:
            if not self.extend():
                break
        return self.last_gap() <= 2.0 * eps

    def freeze(self):
        return Orbit(self.points.copy(), dict(self.source), self.truncation or "lazy")


def import_csv(path):
    """Read one positive decimal per line; ``#`` lines and blanks are skipped."""
    pts = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            text = raw.strip()
            if not text or text.startswith("#"):
                continue
            try:
                x = float(text)
            except ValueError:
                raise ParseError(f"not a number: {text!r}", line=lineno) from None
            if not math.isfinite(x):
                raise ParseError(f"not a finite number: {text!r}", line=lineno)
            if x <= 0.0:
                raise NonPositive(f"point {x!r} is not positive", line=lineno)
            if pts and not x < pts[-1]:
                raise NotDecreasing(f"point {x!r} does not decrease", line=lineno)
            pts.append(x)
    if not pts:
        raise ParseError(f"{path}: no points")
    return Orbit(np.array(pts), {"kind": "imported", "path": str(path)}, "imported")
