"""
Logarithmic corrections
=======================

x^2 and x^2 (-log x) have the same box dimension.  The two-sided log scale
separates them: the first sits at order 4, the second at order 3.
"""

from epsorbit import load_scale, parse
from epsorbit.estimator import analyze

scale = load_scale("two_sided_log")
print(scale)

for f in ("x^2", "x^2*(-log(x))"):
    report, _ = analyze(parse(f), scale, x0=0.3, eps_max=1e-3, eps_min=1e-9)
    print(f"\nf = {f}: m = {report.m}, dim_B = {report.dim_B:.4f}")
    for v in report.verdicts:
        print(f"  {v.member:>18}  {v.verdict:13}  band {v.band[1] / v.band[0]:9.3g}"
              f"  slope {v.slope:+.3f}")

# the generalized derivatives give the same answer without any orbit
print()
for f in ("x^2", "x^2*(-log(x))"):
    mb = scale.multiplicity_bound(parse(f))
    print(f"{f}: first nonzero generalized derivative at index {mb.k0}")
