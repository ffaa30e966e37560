"""Where does the Taylor series of the dropout regulariser converge?

Run: python demos/02_convergence_radius.py
"""
import math

from dropout_taylor import DropoutConfig, diagnose_series, estimate_radius

# Root test on the Taylor coefficients of A at several expansion points.
# The nearest complex singularities of log(1 + e^z) sit at z = +-i pi, so the
# radius at a real point z should approach sqrt(z^2 + pi^2), not a constant.
print(f"{'z':>5} {'radius (60)':>12} {'radius (120)':>13} {'sqrt(z^2+pi^2)':>15} {'2 pi':>7}")
for z in (0.0, 1.0, 3.0, 10.0):
    r60 = estimate_radius(z, 60).radius
    r120 = estimate_radius(z, 120).radius
    print(f"{z:5.1f} {r60:12.4f} {r120:13.4f} {math.hypot(z, math.pi):15.4f} {2 * math.pi:7.4f}")

# Partial sums of the regulariser's series under the single-Bernoulli law,
# where the displacement is B = z delta / (1 - delta).
print()
for z, delta in [(1.0, 0.2), (3.0, 0.5), (10.0, 0.5), (5.0, 0.7), (10.0, 0.9)]:
    diag = diagnose_series(z, DropoutConfig(delta), 80)
    print(f"z={z:4.1f} delta={delta:.1f} B={diag.displacement:6.2f} "
          f"|B|/radius~{diag.growth_ratio:5.2f} verdict={diag.verdict.kind:<12} "
          f"S_80={diag.partial_sums[-1]: .6g} exact={diag.exact:.6g}")

# z=10, delta=0.5 has B=10 > 2 pi yet converges: 10 < sqrt(100 + pi^2).
# z=5, delta=0.7 blows up while its term magnitudes oscillate, so the strict
# growth detector stays "Inconclusive"; the growth ratio above 1 says why.
