"""
Neighborhood lengths of power-law orbits
========================================

Iterate g(x) = x - x^k, tabulate |A_eps| and read off the box dimension
and the critical order on the power scale.
"""

import numpy as np

from epsorbit import load_scale, parse
from epsorbit.estimator import analyze

scale = load_scale("power")

profiles = {}
for k in (2, 3, 4):
    report, profiles[k] = analyze(parse(f"x^{k}"), scale, x0=0.4, eps_max=1e-3, eps_min=1e-9)
    print(f"f = x^{k}: m = {report.m}, dim_B = {report.dim_B:.4f}, 1 - 1/k = {1 - 1/k:.4f}")

# |A_eps| / eps^(1/k) should sit in a narrow band
prof = profiles[2]
print()
print("   epsilon      |A|/eps^(1/2)")
for e, t in zip(prof.eps[::8], prof.total[::8]):
    print(f"  {e:10.3e}   {t / np.sqrt(e):8.4f}")
