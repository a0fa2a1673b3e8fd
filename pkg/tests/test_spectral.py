import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from geolab.errors import CoincidentEndpoints, InsufficientData
from geolab.groups import Family, GroupSpec, enumerate_orbit, preset
from geolab.isometry import BoundaryPoint, base_point, complex_to_hyperboloid
from geolab.spectral import (
    DeltaMethod,
    bm_density,
    estimate_delta,
    poincare_partial,
    ps_atoms,
)

TRIVIAL = GroupSpec(2, {}, {}, Family.CUSTOM)


def sl2z_series(s, r):
    """Sum of exp(-s d(g i, i)) over PSL(2, Z) by integer search.

    Uses 2 cosh d(g i, i) = a^2 + b^2 + c^2 + d^2.
    """
    bound = 2 * math.cosh(r)
    m = int(math.isqrt(int(bound))) + 1
    cs = np.arange(-m, m + 1)
    terms = []
    for a in range(-m, m + 1):
        for b in range(-m, m + 1):
            if a * a + b * b > bound:
                continue
            if a == 0:
                if abs(b) != 1:
                    continue
                c = np.array([-b])
                d = cs
                c = np.broadcast_to(c, d.shape)
            else:
                num = 1 + b * cs
                ok = num % a == 0
                c = cs[ok]
                d = num[ok] // a
            n2 = a * a + b * b + c * c + d * d
            keep = n2 <= bound * (1 + 1e-12)
            terms.append(n2[keep].astype(float))
    n2 = np.concatenate(terms)
    dist = np.arccosh(np.maximum(n2 / 2.0, 1.0))
    return math.fsum(np.exp(-s * dist)) / 2.0  # g and -g


def test_trivial_group_series_is_one():
    for s in (0.1, 1.0, 7.0):
        assert poincare_partial(TRIVIAL, None, s, 5.0).partial_sum == 1.0


def test_large_s_is_dominated_by_identity():
    # i is fixed by S, so the identity term appears twice there; use a generic point
    o = complex_to_hyperboloid(0.21 + 1.43j)
    est = poincare_partial(preset("modular"), o, 50.0, 8.0)
    assert est.partial_sum == pytest.approx(1.0, abs=1e-10)


def test_modular_series_matches_integer_brute_force():
    got = poincare_partial(preset("modular"), None, 1.2, 10.0).partial_sum
    assert got == pytest.approx(sl2z_series(1.2, 10.0), rel=1e-9)


def test_annulus_sums_add_up():
    est = poincare_partial(preset("hecke:lambda=3"), None, 0.8, 8.0)
    assert math.fsum(v for _, v in est.annulus_sums) == pytest.approx(est.partial_sum, rel=1e-12)
    assert all(v >= 0 for _, v in est.annulus_sums)


@pytest.mark.parametrize("name", ["modular", "schottky:default"])
def test_series_monotone(name):
    spec = preset(name)
    ball = enumerate_orbit(spec, None, 9.0)
    by_r = [poincare_partial(spec, None, 1.0, r, ball=ball).partial_sum for r in (3.0, 6.0, 9.0)]
    by_s = [poincare_partial(spec, None, s, 9.0, ball=ball).partial_sum for s in (0.5, 1.0, 1.5)]
    assert by_r == sorted(by_r)
    assert by_s == sorted(by_s, reverse=True)


def test_modular_delta():
    est = estimate_delta(preset("modular"), None, (7.0, 12.0))
    assert 0.9 <= est.delta_hat <= 1.1
    assert est.ci_low <= est.delta_hat <= est.ci_high


def test_modular_annulus_method_agrees():
    spec = preset("modular")
    ball = enumerate_orbit(spec, None, 12.0)
    a = estimate_delta(spec, None, (7.0, 12.0), ball=ball)
    b = estimate_delta(spec, None, (7.0, 12.0), DeltaMethod.ANNULUS, ball=ball)
    assert abs(a.delta_hat - b.delta_hat) < 0.1


def test_hecke_delta_between_half_and_one():
    est = estimate_delta(preset("hecke:lambda=3"), None, (7.0, 12.0))
    assert 0.5 < est.delta_hat < 1.0


def test_delta_independent_of_base_point(rng):
    spec = preset("hecke:lambda=3")
    ests = []
    for _ in range(2):
        z = complex(rng.uniform(-0.5, 0.5), rng.uniform(1.0, 2.0))
        ests.append(estimate_delta(spec, complex_to_hyperboloid(z), (7.0, 11.0)))
    a, b = ests
    assert abs(a.delta_hat - b.delta_hat) <= a.half_width + b.half_width


def test_window_too_narrow():
    with pytest.raises(InsufficientData):
        estimate_delta(preset("modular"), None, (7.0, 9.0))


def test_annuli_straddle_delta():
    spec = preset("schottky:default")
    ball = enumerate_orbit(spec, None, 14.0)
    delta = estimate_delta(spec, None, (8.0, 14.0), ball=ball).delta_hat

    def last_ratios(s):
        sums = [v for _, v in poincare_partial(spec, None, s, 14.0, ball=ball).annulus_sums][-6:-1]
        return np.array(sums[1:]) / np.array(sums[:-1])

    # single annuli are noisy; compare the geometric mean ratio
    below = np.exp(np.mean(np.log(last_ratios(delta - 0.2))))
    above = np.exp(np.mean(np.log(last_ratios(delta + 0.2))))
    assert below > 1.0 > above


def test_trivial_group_single_atom():
    e0 = base_point(2)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        at = ps_atoms(TRIVIAL, e0, e0, 1.0, 5.0, delta_hint=0.0)
    assert len(at.atoms) == 1
    assert at.atoms[0][1] == 1.0
    assert at.total_mass == 1.0


def test_atom_mass_is_series_ratio():
    spec = preset("schottky:default")
    x = complex_to_hyperboloid(0.1 + 1.2j)
    y = base_point(2)
    at = ps_atoms(spec, x, y, 0.9, 10.0, delta_hint=0.56)
    num = sum(w for _, w in at.atoms)
    assert at.normalization == pytest.approx(poincare_partial(spec, y, 0.9, 10.0).partial_sum, rel=1e-12)
    assert at.total_mass == pytest.approx(num / at.normalization)
    # same point: numerator and denominator are the same truncated series
    same = ps_atoms(spec, y, y, 0.9, 10.0, delta_hint=0.56)
    assert same.total_mass == pytest.approx(1.0, rel=1e-12)


def test_warns_below_critical_exponent():
    with pytest.warns(UserWarning):
        ps_atoms(preset("modular"), base_point(2), base_point(2), 0.8, 3.0)


def test_schottky_atoms_confined_to_disks():
    spec = preset("schottky:default")
    delta = estimate_delta(spec, None, (8.0, 14.0)).delta_hat
    e0 = base_point(2)
    at = ps_atoms(spec, e0, e0, delta + 0.1, 12.0)
    disks = spec.params["disks"].values()

    def inside(b):
        return not b.is_infinity and any(abs(b.coords[0] - c) <= r for c, r in disks)

    outside = [(b, w) for b, w in at.atoms if not inside(b)]
    # only the identity atom escapes; its share vanishes only as s -> delta
    assert len(outside) == 1
    assert outside[0][1] == 1.0
    total = sum(w for _, w in at.atoms)
    assert 1.0 - 1.0 / total > 0.6


def test_bm_density_examples():
    zero, inf = BoundaryPoint.finite(0.0), BoundaryPoint.infinity()
    assert bm_density(zero, inf, 1.0) == pytest.approx(0.25)
    assert bm_density(BoundaryPoint.finite(3.0), BoundaryPoint.finite(-0.4), 0.0) == 1.0


@given(st.floats(-20, 20), st.floats(-20, 20), st.floats(0, 2))
def test_bm_density_symmetric(u, v, delta):
    if abs(u - v) < 1e-3:
        return
    a, b = BoundaryPoint.finite(u), BoundaryPoint.finite(v)
    assert bm_density(a, b, delta) == pytest.approx(bm_density(b, a, delta), rel=1e-12)


def test_bm_density_coincident():
    with pytest.raises(CoincidentEndpoints):
        bm_density(BoundaryPoint.finite(1.0), BoundaryPoint.finite(1.0), 1.0)
