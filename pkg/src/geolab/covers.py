"""Regular covers given by homomorphisms to Z^k (or a finite quotient Z^k / nZ^k)."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError, EmptyCensus, HypothesisNotMet, InsufficientData
from .groups import (
    ClosedGeodesic,
    GroupSpec,
    enumerate_closed_geodesics,
    enumerate_orbit,
    exponent_hom,
    hom_eval,
)
from .spectral import DeltaEstimate, DeltaMethod, delta_from_ball
from .statistics import (
    TestFunction,
    average,
    escape_mass_curve,
    geodesic_measure,
)

TREND_SLACK = 0.05
BETA0_MIN = 0.05


@dataclass
class CoverSpec:
    """Kernel of ``hom`` (reduced mod ``modulus`` when given) inside ``base``."""

    base: GroupSpec
    hom: Dict[str, Tuple[int, ...]]
    modulus: Optional[int] = None
    amenable: bool = True

    def __post_init__(self):
        dims = {len(v) for v in self.hom.values()}
        if len(dims) != 1:
            raise ConfigError("hom vectors must share one length")
        for g, v in list(self.hom.items()):
            if g not in self.base.generators:
                raise ConfigError(f"hom names unknown generator {g!r}")
            inv = self.base.inverses[g]
            w = tuple(-x for x in v)
            if inv in self.hom and tuple(self.hom[inv]) != w:
                raise ConfigError(f"hom does not respect inverses at {g!r}")
            self.hom[inv] = w
        if self.modulus is not None and self.modulus < 1:
            raise ConfigError("modulus must be a positive integer")

    @property
    def rank(self) -> int:
        return len(next(iter(self.hom.values())))

    def image(self, w: str) -> np.ndarray:
        v = hom_eval(self.base, w, self.hom)
        return v % self.modulus if self.modulus else v

    def in_kernel(self, w: str) -> bool:
        return not np.any(self.image(w))


def parse_hom(spec: GroupSpec, text: str) -> CoverSpec:
    """``a`` / ``a,b`` (exponent sums), ``zero`` (trivial hom) or ``T%3`` (mod 3)."""
    text = text.strip()
    modulus = None
    if "%" in text:
        text, _, mod = text.partition("%")
        modulus = int(mod)
    if text in ("zero", "0", ""):
        lab = next(iter(spec.generators))
        return CoverSpec(spec, {lab: (0,)}, modulus)
    labels = [t.strip() for t in text.split(",") if t.strip()]
    for lab in labels:
        if lab not in spec.generators:
            raise ConfigError(f"unknown generator {lab!r} in hom")
    return CoverSpec(spec, dict(exponent_hom(spec, labels)), modulus)


def kernel_census(cover: CoverSpec, T: float,
                  census: Optional[Sequence[ClosedGeodesic]] = None) -> List[ClosedGeodesic]:
    """Base classes whose representative word maps to zero."""
    if census is None:
        census = enumerate_closed_geodesics(cover.base, T, primitive_only=True)
    return [g for g in census if g.length <= T + 1e-9 and cover.in_kernel(g.key)]


def check_nonelementary(cover: CoverSpec, T: float,
                        census: Optional[Sequence[ClosedGeodesic]] = None) -> bool:
    """True if two kernel classes have distinct axes."""
    ker = kernel_census(cover, T, census)
    axes = set()
    for g in ker:
        a, b = g.axis
        axes.add((round(float(a.coords[0]), 9), round(float(b.coords[0]), 9)))
        if len(axes) >= 2:
            return True
    return False


def kernel_ball_mask(cover: CoverSpec, ball) -> np.ndarray:
    return np.array([cover.in_kernel(w) for w in ball.words()], dtype=bool)


def kernel_delta(cover: CoverSpec, o=None, r_window: Tuple[float, float] = (8.0, 14.0),
                 method: DeltaMethod = DeltaMethod.ORBIT_COUNT, ball=None) -> DeltaEstimate:
    """Growth rate of the kernel's orbit counts, from the base ball restricted to
    zero-image words."""
    lo, hi = r_window
    if hi - lo < 3:
        raise InsufficientData("fit window must have width at least 3")
    if ball is None:
        ball = enumerate_orbit(cover.base, o, hi)
    sub = ball.restrict(kernel_ball_mask(cover, ball))
    return delta_from_ball(sub, r_window, method)


def cover_equidistribution(cover: CoverSpec, Ts: Sequence[float], f: TestFunction,
                           samples_per_unit_length: int = 10,
                           census: Optional[Sequence[ClosedGeodesic]] = None) -> dict:
    """Kernel-census averages of ``f`` at increasing T against a base reference.

    The cover test function is ``f`` on one sheet of the cover; its sum over
    deck translates is ``f`` itself on the base, so no coset truncation is
    needed.  The reference is the base-census average at the largest T.
    """
    Ts = sorted(Ts)
    if census is None:
        census = enumerate_closed_geodesics(cover.base, Ts[-1], primitive_only=True)
    base_mu = geodesic_measure(cover.base, census, samples_per_unit_length)
    ref = average(cover.base, base_mu, f)
    table = []
    for T in Ts:
        ker = kernel_census(cover, T, census)
        if not ker:
            raise EmptyCensus(f"kernel census empty at T = {T}")
        lhs = average(cover.base, geodesic_measure(cover.base, ker, samples_per_unit_length), f)
        table.append({"T": T, "classes": len(ker), "lhs": lhs, "error": abs(lhs - ref)})
    passed = table[-1]["error"] <= table[0]["error"] + TREND_SLACK
    return {
        "reference": ref,
        "reference_note": "base census average at the largest T (equidistribution proxy)",
        "coset_truncation": 0,
        "table": table,
        "slack": TREND_SLACK,
        "passed": bool(passed),
        "f": f.describe(),
    }


def escape_mass_match(cover: CoverSpec, T: float, Y: float,
                      census: Optional[Sequence[ClosedGeodesic]] = None) -> dict:
    if census is None:
        census = enumerate_closed_geodesics(cover.base, T, primitive_only=True)
    ker = kernel_census(cover, T, census)
    if not ker:
        raise EmptyCensus(f"kernel census empty at T = {T}")
    base = escape_mass_curve(cover.base, T, [Y], census=census)[0][1]
    kern = escape_mass_curve(cover.base, T, [Y], census=ker)[0][1]
    return {"base": base, "kernel": kern, "gap": abs(base - kern)}


def mass_nonescape_check(cover: CoverSpec, Ts: Sequence[float], Y: float,
                         delta_kernel: Optional[float] = None, r_window: Tuple[float, float] = (7.0, 11.0),
                         census: Optional[Sequence[ClosedGeodesic]] = None,
                         strict: bool = False) -> dict:
    """Smallest mass of {height < Y} under the kernel-census measure across T."""
    base = cover.base
    if delta_kernel is None:
        delta_kernel = kernel_delta(cover, None, r_window).delta_hat
    margin = delta_kernel - base.r_max / 2
    report = {"delta_kernel": delta_kernel, "r_max": base.r_max, "margin": margin, "Y": Y}
    if margin < 0.1:
        if strict:
            raise HypothesisNotMet(f"delta(kernel) - r_max/2 = {margin:.3f} < 0.1")
        report.update(status="hypothesis not met", passed=False)
        return report
    Ts = sorted(Ts)
    if census is None:
        census = enumerate_closed_geodesics(base, Ts[-1], primitive_only=True)
    table = []
    for T in Ts:
        ker = kernel_census(cover, T, census)
        if not ker:
            raise EmptyCensus(f"kernel census empty at T = {T}")
        if base.cusps:
            cusp = escape_mass_curve(base, T, [Y], census=ker)[0][1]
        else:
            cusp = 0.0
        table.append({"T": T, "classes": len(ker), "compact_mass": 1.0 - cusp})
    beta0 = min(r["compact_mass"] for r in table)
    report.update(status="ok", table=table, beta0=beta0, threshold=BETA0_MIN,
                  passed=bool(beta0 >= BETA0_MIN))
    return report
