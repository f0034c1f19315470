"""
A weak focus through its return map
===================================

The cubic focus x' = -y - x r^2, y' = x - y r^2 spirals in like
r -> r / sqrt(1 + 4 pi r^2).  Its crossings of the positive x axis form an
orbit with box dimension 2/3, the same as for g(x) = x - x^3.
"""

import math

from epsorbit import load_field, load_scale
from epsorbit.estimator import critical_order
from epsorbit.neighborhood import profile
from epsorbit.poincare import lazy_poincare_orbit, poincare_orbit

field, section = load_field("cubic_focus")

orb = poincare_orbit(field, section, 0.4, n_max=6)
r = 0.4
for x in orb.points:
    print(f"crossing {x:.12f}   closed form {r:.12f}")
    r = r / math.sqrt(1 + 4 * math.pi * r * r)

prof = profile(lazy_poincare_orbit(field, section, 0.4), 1e-3, 1e-6, 8)
report = critical_order(prof, load_scale("odd_power"))
print(f"\n{prof.source['points']} crossings, dim_B = {report.dim_B:.4f}, m = {report.m}")
