import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from geolab.errors import BudgetExceeded, ConfigError
from geolab.groups import (
    Family,
    GroupSpec,
    canonical_class_key,
    census_counts,
    cyclic_reduce,
    enumerate_closed_geodesics,
    enumerate_orbit,
    eval_word,
    exponent_hom,
    hecke,
    hom_eval,
    preset,
    reduce_word,
    schottky_symmetric,
    to_normal_form,
    word_inverse,
    word_period,
)
from geolab.isometry import Kind, classify, complex_to_hyperboloid, translation_length
from geolab.spectral import counting_constant, estimate_delta

FREE = preset("schottky:default")
free_words = st.text(alphabet="aAbB", max_size=14).map(lambda w: reduce_word(FREE, w))


# --------------------------------------------------------------------------
# oracles


def sl2z_ball_count(r):
    """Integer matrices of determinant 1 with d(g i, i) <= r, counted up to sign."""
    bound = 2 * math.cosh(r)
    m = int(math.isqrt(int(bound))) + 1
    n = 0
    rng = range(-m, m + 1)
    for a, b, c in itertools.product(rng, rng, rng):
        rest = bound - a * a - b * b - c * c
        if rest < 0:
            continue
        for d in rng:
            if d * d <= rest + 1e-9 and a * d - b * c == 1:
                n += 1
    return n // 2


def zagier_class_count(disc):
    """Proper equivalence classes of forms of a non-square discriminant.

    Reduced forms (a > 0, c > 0, b > a + c) fall into cycles under the unique
    reduced neighbour f(y, n y - x); one cycle per class.
    """
    forms = []
    for b in range(1, disc + 1):  # b - 2 sqrt(ac) >= 1 forces b <= disc
        if (b * b - disc) % 4 or b * b <= disc:
            continue
        ac = (b * b - disc) // 4
        for a in range(1, b):
            if ac % a == 0:
                c = ac // a
                if b > a + c:
                    forms.append((a, b, c))

    def step(f):
        a, b, c = f
        hits = []
        for n in range(-4 * b - 4, 4 * b + 5):
            g = (c, -b + 2 * c * n, a - b * n + c * n * n)
            if g[0] > 0 and g[2] > 0 and g[1] > g[0] + g[2]:
                hits.append(g)
        assert len(hits) == 1
        return hits[0]

    seen, cycles = set(), 0
    for f in forms:
        if f in seen:
            continue
        cycles += 1
        g = f
        while g not in seen:
            seen.add(g)
            g = step(g)
    return cycles


def necklace_count(k, m=2):
    """Conjugacy classes of cyclically reduced words of length k in F_m."""
    def cyc(n):
        return (2 * m - 1) ** n + 1 + (m - 1) * (1 + (-1) ** n)

    return sum(phi(k // d) * cyc(d) for d in range(1, k + 1) if k % d == 0) // k


def phi(n):
    return sum(1 for j in range(1, n + 1) if math.gcd(j, n) == 1)


# --------------------------------------------------------------------------
# presets and words


def test_preset_parsing():
    assert preset("modular").family is Family.MODULAR
    h = preset("hecke:lambda=3")
    assert h.params["lambda"] == 3.0
    s = preset("schottky:half_width=0.5")
    assert s.params["half_width"] == 0.5
    for bad in ("nope", "hecke:mu=2", "modular:x=1", "schottky:half_width=2"):
        with pytest.raises(ConfigError):
            preset(bad)


def test_schottky_disks_must_be_disjoint():
    from geolab.groups import schottky

    with pytest.raises(ConfigError):
        schottky([0, 0.5, 3, 6], [0.4, 0.4, 0.4, 0.4])


def test_modular_generators_are_integer():
    spec = preset("modular")
    assert spec.generators["S"] == ((0, -1), (1, 0))
    assert spec.generators["T"] == ((1, 1), (0, 1))


def test_normal_form_relations():
    spec = preset("modular")
    assert to_normal_form(spec, "SS") == ""
    assert to_normal_form(spec, "UUU") == ""
    assert to_normal_form(spec, "Tt") == ""
    # equal in PSL(2, Z): up to sign
    a = np.array(eval_word(spec, "T").exact_2x2)
    b = np.array(eval_word(spec, to_normal_form(spec, "T")).exact_2x2)
    assert np.array_equal(a, b) or np.array_equal(a, -b)


def test_key_examples():
    assert canonical_class_key("ba") == "ab"
    assert canonical_class_key("abAB") == "ABab"


@given(free_words)
def test_key_idempotent(w):
    k = canonical_class_key(w, FREE)
    assert canonical_class_key(k, FREE) == k


@given(free_words, st.integers(0, 13))
def test_key_rotation_invariant(w, i):
    w = cyclic_reduce(FREE, w)
    if not w:
        return
    i %= len(w)
    assert canonical_class_key(w[i:] + w[:i]) == canonical_class_key(w)


@given(free_words, free_words)
def test_conjugates_share_key(w, u):
    conj = u + w + word_inverse(FREE, u)
    assert canonical_class_key(conj, FREE) == canonical_class_key(w, FREE)


def test_word_period():
    assert word_period("abab") == 2
    assert word_period("aab") == 3


def test_hom_eval():
    hom = exponent_hom(FREE, ["a"])
    assert hom_eval(FREE, "", hom).tolist() == [0]
    assert hom_eval(FREE, "abAba", hom).tolist() == [1]


@given(free_words, free_words)
def test_hom_additive_and_conjugation_invariant(w, u):
    hom = exponent_hom(FREE, ["a", "b"])
    v = hom_eval(FREE, w, hom)
    np.testing.assert_array_equal(hom_eval(FREE, w + u, hom), v + hom_eval(FREE, u, hom))
    np.testing.assert_array_equal(hom_eval(FREE, u + w + word_inverse(FREE, u), hom), v)


def test_hom_rejects_inconsistent_inverse():
    with pytest.raises(ValueError):
        hom_eval(FREE, "a", {"a": (1,), "A": (1,)})


# --------------------------------------------------------------------------
# orbit balls


def test_ball_radius_zero_is_identity():
    # a generic base point; i itself is fixed by S
    o = complex_to_hyperboloid(0.13 + 1.37j)
    for name in ("modular", "hecke:lambda=3", "schottky:default"):
        ball = enumerate_orbit(preset(name), o, 0.0)
        assert len(ball) == 1
        assert ball.word(0) == ""


def test_modular_ball_matches_integer_brute_force():
    ball = enumerate_orbit(preset("modular"), None, 3.0)
    assert len(ball) == sl2z_ball_count(3.0) == 66


def test_modular_ball_matches_brute_force_at_other_radii():
    for r in (1.5, 4.0, 5.0):
        assert len(enumerate_orbit(preset("modular"), None, r)) == sl2z_ball_count(r)


def test_ball_words_evaluate_to_ball_matrices():
    spec = preset("modular")
    ball = enumerate_orbit(spec, None, 4.0)
    for i in range(0, len(ball), 7):
        m = np.array(eval_word(spec, ball.word(i)).exact_2x2)
        assert np.allclose(m, ball.matrices[i]) or np.allclose(m, -ball.matrices[i])


def brute_force_ball_size(spec, r, max_len):
    seen = set()
    for n in range(max_len + 1):
        for w in itertools.product(sorted(spec.generators), repeat=n):
            w = "".join(w)
            if reduce_word(spec, w) != w:
                continue
            g = eval_word(spec, w)
            x = g.base_point()
            if math.acosh(max(x[0], 1.0)) <= r:
                m = np.array(g.exact_2x2, dtype=float)
                m = m if (m[0, 0], m[0, 1]) > (0, 0) else -m
                seen.add(tuple(np.round(m.ravel(), 6)))
    return len(seen)


def test_schottky_ball_matches_word_brute_force():
    spec = preset("schottky:half_width=0.3")
    r = 5.0
    # every letter after the first costs at least the minimal side gap
    from geolab.groups import schottky_min_gap

    max_len = int(r / schottky_min_gap(spec)) + 2
    assert len(enumerate_orbit(spec, None, r)) == brute_force_ball_size(spec, r, max_len)


def test_hecke_ball_matches_word_brute_force():
    spec = hecke(3.0)
    assert len(enumerate_orbit(spec, None, 4.0)) == brute_force_ball_size(spec, 4.0, 7)


def test_ball_is_sorted_and_bounded():
    ball = enumerate_orbit(preset("hecke:lambda=3"), None, 6.0)
    assert np.all(np.diff(ball.displacement) >= 0)
    assert ball.displacement[-1] <= 6.0 + 1e-12


@pytest.mark.parametrize("name", ["modular", "hecke:lambda=3", "schottky:default"])
def test_ball_monotone_in_radius(name):
    spec = preset(name)
    small = enumerate_orbit(spec, None, 4.0)
    big = enumerate_orbit(spec, None, 6.0)

    def keys(ball):
        out = set()
        for m in ball.matrices:
            m = m if (m[0, 0], m[0, 1]) > (0, 0) else -m
            out.add(tuple(np.round(m.ravel(), 6)))
        return out

    assert keys(small) <= keys(big)
    assert len(keys(big)) == len(big)


def test_ball_budget():
    with pytest.raises(BudgetExceeded):
        enumerate_orbit(preset("modular"), None, 8.0, budget=100)


def test_ball_radius_limit():
    with pytest.raises(ConfigError):
        enumerate_orbit(preset("modular"), None, 20.0)


def test_modular_growth_rate():
    est = estimate_delta(preset("modular"), None, (6.0, 12.0))
    assert 0.9 <= est.delta_hat <= 1.1


def test_counting_bound_holds():
    spec = preset("modular")
    ball = enumerate_orbit(spec, None, 12.0)
    est = estimate_delta(spec, None, (7.0, 12.0), ball=ball)
    B = counting_constant(ball, est)
    radii = np.arange(1.0, 13.0)
    assert np.all(ball.count_within(radii) <= B * np.exp(est.delta_hat * radii) * (1 + 1e-12))


def test_custom_trivial_group():
    trivial = GroupSpec(2, {}, {}, Family.CUSTOM)
    assert len(enumerate_orbit(trivial, None, 5.0)) == 1


# --------------------------------------------------------------------------
# closed geodesics


def test_no_modular_geodesic_below_golden_length():
    assert enumerate_closed_geodesics(preset("modular"), 1.9, True) == []


def test_shortest_modular_geodesic():
    census = enumerate_closed_geodesics(preset("modular"), 2.0, True)
    assert len(census) == 1
    g = census[0]
    assert abs(g.trace) == 3
    assert g.length == pytest.approx(2 * math.acosh(1.5), abs=1e-12)


def test_modular_class_count_matches_quadratic_forms():
    spec = preset("modular")
    for T in (4.0, 5.0, 6.0):
        tmax = int(2 * math.cosh(T / 2))
        want = sum(zagier_class_count(t * t - 4) for t in range(3, tmax + 1))
        assert len(enumerate_closed_geodesics(spec, T)) == want


def test_modular_class_count_at_four():
    spec = preset("modular")
    assert len(enumerate_closed_geodesics(spec, 4.0)) == 11
    assert len(enumerate_closed_geodesics(spec, 4.0, True)) == 10


def test_census_entries_are_consistent():
    spec = preset("modular")
    census = enumerate_closed_geodesics(spec, 6.0)
    keys = [g.key for g in census]
    assert len(set(keys)) == len(keys)
    for g in census:
        iso = g.cls.isometry()
        assert classify(iso).kind is Kind.LOXODROMIC
        assert translation_length(iso) == pytest.approx(g.length, abs=1e-9)
        assert g.length <= 6.0 + 1e-7
        # the key is a word for the class
        assert abs(sum(np.diag(np.array(eval_word(spec, g.key).exact_2x2)))) == abs(g.trace)
        assert g.primitive == (g.power == 1)
    assert [g.length for g in census] == sorted(g.length for g in census)


def test_schottky_census_matches_necklace_formula():
    spec = schottky_symmetric(0.05)  # tiny disks: length is nearly proportional to word length
    by_len = {}
    for n in range(1, 6):
        for w in itertools.product("aAbB", repeat=n):
            w = "".join(w)
            if cyclic_reduce(spec, w) == w:
                by_len.setdefault(n, []).append(translation_length(eval_word(spec, w)))
    # a cutoff strictly between word lengths 4 and 5
    assert max(by_len[4]) < min(by_len[5])
    T = 0.5 * (max(by_len[4]) + min(by_len[5]))
    census = enumerate_closed_geodesics(spec, T, T_max=T)
    assert len(census) == sum(necklace_count(k) for k in range(1, 5))
    counts = {k: sum(1 for g in census if len(g.key) == k) for k in range(1, 5)}
    assert counts == {k: necklace_count(k) for k in range(1, 5)}


def test_hecke_census_lengths_are_traces():
    spec = hecke(3.0)
    census = enumerate_closed_geodesics(spec, 8.0)
    assert census
    for g in census[::5]:
        assert translation_length(eval_word(spec, g.key)) == pytest.approx(g.length, rel=1e-9)


def test_census_counts_helper():
    census = enumerate_closed_geodesics(preset("modular"), 6.0)
    counts = census_counts(census, [2.0, 4.0, 6.0])
    assert counts.tolist() == [1, 11, len(census)]


def test_census_limit():
    with pytest.raises(ConfigError):
        enumerate_closed_geodesics(preset("modular"), 13.0)
