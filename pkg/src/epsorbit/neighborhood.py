"""Lengths of epsilon-neighborhoods of orbits.

For a decreasing orbit the neighborhood ``A_eps`` splits into a *tail* of
disjoint intervals (gaps larger than ``2 eps``) and a *nucleus*, the merged
block reaching down to 0::

    n_eps = least n with x_n - x_{n+1} <= 2 eps      (a tie joins the nucleus)
    |N_eps| = x_{n_eps} + eps,    |T_eps| = 2 eps n_eps

An independent interval-union sweep gives the ``exact`` column used as an
oracle; the two differ only at the lower endpoint and at gap ties.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, DomainError, OrbitTooShort
from .orbit import LazyOrbit, Orbit

__all__ = [
    "EpsilonProfile",
    "length_at",
    "union_length",
    "exact_length",
    "eps_grid",
    "profile",
    "thread_count",
]

CSV_HEADER = "epsilon,total,nucleus,tail,n_eps,exact"


def union_length(starts, ends):
    """Total length of a union of closed intervals (sort and sweep)."""
    starts = np.asarray(starts, dtype=float)
    ends = np.asarray(ends, dtype=float)
    if starts.size == 0:
        return 0.0
    order = np.argsort(starts, kind="stable")
    s, e = starts[order], ends[order]
    reach = np.maximum.accumulate(e)
    prev = np.concatenate(([-np.inf], reach[:-1]))
    return float(np.sum(np.maximum(0.0, e - np.maximum(s, prev))))


def exact_length(points, eps, fill=True):
    """Length of ``U [x_n - eps, x_n + eps]`` clipped at 0, plus
    ``[0, x_last + eps]`` when ``fill`` is set."""
    p = np.asarray(points, dtype=float)
    starts = np.maximum(p - eps, 0.0)
    ends = p + eps
    if fill:
        starts = np.append(starts, 0.0)
        ends = np.append(ends, p[-1] + eps)
    return union_length(starts, ends)


def _first_small_gap(points, eps):
    gaps = points[:-1] - points[1:]
    if gaps.size == 0 or gaps[-1] > 2.0 * eps:
        return None
    return int(np.argmax(gaps <= 2.0 * eps))


def length_at(orbit, eps):
    """``(nucleus, tail, n_eps, exact)`` for one ``eps``.

    Assumes the gaps decrease along the orbit (``f`` increasing), which is
    not re-checked here.
    """
    eps = float(eps)
    if not eps > 0:
        raise DomainError("epsilon must be positive")
    pts = orbit.points
    n = _first_small_gap(pts, eps)
    if n is None:
        exact = exact_length(pts, eps, fill=False)
        last = float(pts[-2] - pts[-1]) if pts.size > 1 else math.inf
        raise OrbitTooShort(
            f"orbit not resolved at eps = {eps!r}: last gap {last!r} > 2 eps",
            eps=eps, exact=exact)
    nucleus = float(pts[n]) + eps
    tail = 2.0 * eps * n
    return nucleus, tail, n, exact_length(pts, eps)


def eps_grid(eps_max, eps_min, ppd=8):
    """Geometric grid from ``eps_max`` down to ``eps_min``, ``ppd`` per decade."""
    if not 0 < eps_min <= eps_max:
        raise DomainError(f"need 0 < eps_min <= eps_max, got {eps_min!r}, {eps_max!r}")
    if eps_min == eps_max:
        return np.array([float(eps_max)])
    decades = math.log10(eps_max / eps_min)
    n = max(int(round(decades * ppd)) + 1, 2)
    return np.geomspace(eps_max, eps_min, n)


def thread_count():
    env = os.environ.get("EPSORBIT_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise DataError(f"EPSORBIT_THREADS must be an integer, got {env!r}") from None
    return min(4, os.cpu_count() or 1)


@dataclass
class EpsilonProfile:
    eps: np.ndarray
    total: np.ndarray
    nucleus: np.ndarray
    tail: np.ndarray
    n_eps: np.ndarray
    exact: np.ndarray
    grid: dict = field(default_factory=dict)
    source: dict = field(default_factory=dict)

    def __len__(self):
        return self.eps.size

    def rows(self):
        return list(zip(self.eps.tolist(), self.total.tolist(), self.nucleus.tolist(),
                        self.tail.tolist(), self.n_eps.tolist(), self.exact.tolist()))

    def subset(self, mask):
        return EpsilonProfile(self.eps[mask], self.total[mask], self.nucleus[mask],
                              self.tail[mask], self.n_eps[mask], self.exact[mask],
                              dict(self.grid), dict(self.source))

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write(CSV_HEADER + "\n")
            for e, t, nu, ta, n, ex in self.rows():
                fh.write(f"{e!r},{t!r},{nu!r},{ta!r},{n},{ex!r}\n")

    def to_dict(self):
        cols = ("epsilon", "total", "nucleus", "tail", "n_eps", "exact")
        return {
            "grid": self.grid,
            "source": self.source,
            "rows": [dict(zip(cols, r)) for r in self.rows()],
        }

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def from_rows(cls, rows, grid=None, source=None):
        if not rows:
            raise DataError("empty profile")
        a = np.array(rows, dtype=float)
        return cls(a[:, 0], a[:, 1], a[:, 2], a[:, 3], a[:, 4].astype(np.int64), a[:, 5],
                   grid or {}, source or {})

    @classmethod
    def from_csv(cls, path):
        with open(path) as fh:
            header = fh.readline().strip()
            if header != CSV_HEADER:
                raise DataError(f"{path}: expected header {CSV_HEADER!r}")
            rows = [[float(v) for v in line.split(",")] for line in fh if line.strip()]
        return cls.from_rows(rows, source={"kind": "file", "path": str(path)})

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            obj = json.load(fh)
        cols = ("epsilon", "total", "nucleus", "tail", "n_eps", "exact")
        rows = [[r[c] for c in cols] for r in obj["rows"]]
        return cls.from_rows(rows, obj.get("grid"), obj.get("source"))


def profile(source, eps_max=1e-2, eps_min=1e-9, ppd=8, threads=None):
    """Tabulate the decomposition on a geometric epsilon grid.

    ``source`` is an :class:`Orbit`, a :class:`LazyOrbit` (extended until
    ``eps_min`` is resolved), or a pair ``(f, x0)``.
    """
    if isinstance(source, tuple):
        f, x0 = source
        source = LazyOrbit.from_map(f, x0)
    eps = eps_grid(eps_max, eps_min, ppd)
    x0 = float(source.points[0])
    if eps_max >= x0:
        raise DomainError(f"eps_max = {eps_max!r} must be below x0 = {x0!r}")
    if isinstance(source, LazyOrbit):
        source.resolve(float(eps[-1]))
        orbit = source.freeze()
    else:
        orbit = source

    def row(e):
        return length_at(orbit, e)

    workers = threads or thread_count()
    if workers > 1 and eps.size > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(row, eps))
    else:
        results = [row(e) for e in eps]
    nuc = np.array([r[0] for r in results])
    tail = np.array([r[1] for r in results])
    return EpsilonProfile(
        eps=eps,
        total=nuc + tail,
        nucleus=nuc,
        tail=tail,
        n_eps=np.array([r[2] for r in results], dtype=np.int64),
        exact=np.array([r[3] for r in results]),
        grid={"eps_max": float(eps_max), "eps_min": float(eps_min), "ppd": ppd},
        source=dict(orbit.source, points=len(orbit), truncation=orbit.truncation),
    )
