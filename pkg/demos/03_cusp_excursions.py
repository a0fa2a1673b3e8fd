"""How much time closed geodesics spend high in the cusp.

For the modular surface the Liouville measure gives the region above
height Y the mass 3 / (pi Y).  Long closed geodesics equidistribute, so
their average time above Y should approach that value, and the classes that
spend a fraction beta of their time up there become exponentially rarer.

    python3 demos/03_cusp_excursions.py
"""
import math

from geolab.groups import enumerate_closed_geodesics, preset
from geolab.statistics import beta_tail_counts, escape_mass_curve

spec = preset("modular")
census = enumerate_closed_geodesics(spec, 12.0, primitive_only=True)

print("   Y   census T=8  census T=12  3/(pi Y)")
for Y in (1.0, 1.5, 2.0, 3.0, 5.0):
    a = escape_mass_curve(spec, 8.0, [Y], census=census)[0][1]
    b = escape_mass_curve(spec, 12.0, [Y], census=census)[0][1]
    print(f"{Y:4.1f}   {a:9.4f}  {b:11.4f}  {3 / (math.pi * Y):8.4f}")

bt = beta_tail_counts(spec, 12.0, 2.0, [0.0, 0.2, 0.4, 0.6, 0.8], delta_hat=1.0)
print("\nclasses with cusp fraction >= beta (Y = 2), T = 10 / 11 / 12")
for row in bt.table():
    counts = " ".join(f"{int(c):6d}" for c in row["counts"])
    print(f"  beta {row['beta']:.1f}: {counts}   rate {row['rate']:.3f}  bound {row['bound']:.3f}")
