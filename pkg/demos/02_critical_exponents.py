"""Critical exponents from orbit counts.

The number of orbit points within distance r grows like e^{delta r}.  For
the modular group (a lattice) delta = 1.  The Hecke group with lambda = 3
has infinite covolume and a rank one cusp, so 1/2 < delta < 1.  A Schottky
group has no cusps and its delta is the dimension of a Cantor limit set.

    python3 demos/02_critical_exponents.py
"""
from geolab.groups import enumerate_orbit, preset
from geolab.spectral import DeltaMethod, estimate_delta, poincare_partial

for name, window in (("modular", (7.0, 12.0)), ("hecke:lambda=3", (7.0, 12.0)),
                     ("schottky:default", (8.0, 14.0))):
    spec = preset(name)
    ball = enumerate_orbit(spec, None, window[1])
    fit = estimate_delta(spec, None, window, ball=ball)
    ann = estimate_delta(spec, None, window, DeltaMethod.ANNULUS, ball=ball)
    print(f"{name:<18} {len(ball):>9} orbit points  delta ~ {fit.delta_hat:.4f} "
          f"[{fit.ci_low:.4f}, {fit.ci_high:.4f}]  annulus fit {ann.delta_hat:.4f}")

# the partial Poincare series only stabilises for s above delta
spec = preset("schottky:default")
ball = enumerate_orbit(spec, None, 14.0)
print("\nschottky partial sums, r = 8 / 11 / 14")
for s in (0.4, 0.56, 0.8):
    sums = [poincare_partial(spec, None, s, r, ball=ball).partial_sum for r in (8.0, 11.0, 14.0)]
    print(f"  s = {s:4.2f}: " + "  ".join(f"{v:10.3f}" for v in sums))
