"""Closed geodesics on the modular surface, counted by length.

Each closed geodesic is a conjugacy class of a hyperbolic element of
PSL(2, Z); its length is 2 arccosh(|trace| / 2).  The number of classes of
length at most T grows like e^T / T, so the naive log-slope of the counts
sits a little below 1 at small T while T * count / e^T levels off.

    python3 demos/01_modular_census.py
"""
import math

import numpy as np

from geolab.groups import census_counts, enumerate_closed_geodesics, preset

spec = preset("modular")
census = enumerate_closed_geodesics(spec, 11.0, primitive_only=True)
print(f"{len(census)} primitive classes of length <= 11")

print("\nshortest few:")
for g in census[:6]:
    print(f"  {g.key:<8} trace {g.trace:>5.0f}  length {g.length:.6f}")

Ts = np.arange(4.0, 11.5, 1.0)
counts = census_counts(census, Ts)
print("\n   T    count   count/(e^T/T)")
for T, n in zip(Ts, counts):
    print(f"{T:5.1f} {int(n):8d}   {n / (math.exp(T) / T):.4f}")

slope = np.polyfit(Ts[-4:], np.log(counts[-4:]), 1)[0]
adj = np.polyfit(Ts[-4:], np.log(Ts[-4:] * counts[-4:]), 1)[0]
print(f"\nslope of log count over T = 8..11: {slope:.4f}")
print(f"same for log(T * count):           {adj:.4f}")
