"""Measures built from closed geodesics and the experiments run on them."""
from __future__ import annotations

import math
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .dynamics import (
    ExcursionProfile,
    QuotientMetric,
    base_points_sl2,
    excursion_profile,
    flow_sl2,
    geodesic_frames,
    itinerary_many,
    reduce_many,
    separated_count,
)
from .errors import BudgetExceeded, EmptyInput, InsufficientData
from .groups import ClosedGeodesic, GroupSpec, enumerate_closed_geodesics

ENTROPY_SLACK = 0.3
BETA_SLACK = 0.25
COVER_SLACK = 0.35
ETA = 0.25
COVER_N_MAX = 8


class Provenance(str, Enum):
    GEODESIC_AVERAGE = "geodesic_average"
    TRAJECTORY = "trajectory"
    CUSTOM = "custom"


@dataclass
class EmpiricalMeasure:
    """Weighted SL2 frames.  ``orbit`` tags each sample with its geodesic index."""

    frames: np.ndarray
    weights: np.ndarray
    provenance: Provenance = Provenance.CUSTOM
    param: Optional[float] = None
    orbit: Optional[np.ndarray] = None
    keys: List[str] = field(default_factory=list)

    def __post_init__(self):
        if np.any(self.weights <= 0):
            raise ValueError("weights must be positive")

    @property
    def total_weight(self) -> float:
        return float(math.fsum(self.weights))

    def __len__(self) -> int:
        return self.weights.shape[0]

    def pushforward(self, t: float) -> "EmpiricalMeasure":
        return EmpiricalMeasure(flow_sl2(self.frames, t), self.weights.copy(), self.provenance,
                                self.param, self.orbit, list(self.keys))


def geodesic_measure(spec: GroupSpec, geodesics: Sequence[ClosedGeodesic],
                     samples_per_unit_length: int = 10) -> EmpiricalMeasure:
    """Average of the orbit measures, each orbit sampled on a uniform grid and
    weighted equally."""
    if not geodesics:
        raise EmptyInput("no geodesics to average")
    frames, weights, orbit = [], [], []
    m = len(geodesics)
    for i, g in enumerate(geodesics):
        k = max(1, int(math.ceil(g.length * samples_per_unit_length)))
        ts = -g.length / 2 + g.length * (np.arange(k) + 0.5) / k
        frames.append(geodesic_frames(g, ts))
        weights.append(np.full(k, 1.0 / (k * m)))
        orbit.append(np.full(k, i))
    T = max(g.length for g in geodesics)
    return EmpiricalMeasure(np.concatenate(frames), np.concatenate(weights),
                            Provenance.GEODESIC_AVERAGE, T, np.concatenate(orbit),
                            [g.key for g in geodesics])


def trajectory_measure(spec: GroupSpec, start: np.ndarray, length: float,
                       samples_per_unit_length: int = 10) -> EmpiricalMeasure:
    """Uniform samples along one (not necessarily closed) trajectory."""
    k = max(1, int(math.ceil(length * samples_per_unit_length)))
    ts = length * (np.arange(k) + 0.5) / k
    frames = flow_sl2(np.asarray(start, dtype=float)[None], ts)
    return EmpiricalMeasure(frames, np.full(k, 1.0 / k), Provenance.TRAJECTORY, length)


# --------------------------------------------------------------------------
# built-in test functions


class TestFunction:
    """A bounded function of the (reduced) frame; subclasses vectorize ``values``."""

    name = "f"
    __test__ = False  # keep pytest from collecting the class by its name

    def values(self, spec: GroupSpec, frames: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def describe(self) -> dict:
        return {"name": self.name}


class Constant(TestFunction):
    name = "const"

    def __init__(self, c: float = 1.0):
        self.c = float(c)

    def values(self, spec, frames):
        return np.full(frames.shape[0], self.c)

    def describe(self):
        return {"name": self.name, "c": self.c}


def _reduced_heights(spec: GroupSpec, frames: np.ndarray) -> np.ndarray:
    red, _ = reduce_many(spec, base_points_sl2(frames))
    return red.imag


class CuspIndicator(TestFunction):
    name = "cusp"

    def __init__(self, Y: float):
        self.Y = float(Y)

    def values(self, spec, frames):
        return (_reduced_heights(spec, frames) >= self.Y).astype(float)

    def describe(self):
        return {"name": self.name, "Y": self.Y}


class HeightPower(TestFunction):
    """min(height, Y) ** sigma on the reduced base point."""

    name = "height"

    def __init__(self, Y: float, sigma: float = 1.0):
        self.Y, self.sigma = float(Y), float(sigma)

    def values(self, spec, frames):
        return np.minimum(_reduced_heights(spec, frames), self.Y) ** self.sigma

    def describe(self):
        return {"name": self.name, "Y": self.Y, "sigma": self.sigma}


class Bump(TestFunction):
    """(1 - (d/r)^2)^2 for quotient distance d < r from a point z0."""

    name = "bump"

    def __init__(self, z0: complex, radius: float = 0.5):
        if not z0.imag > 0:
            raise ValueError("bump center must be in the upper half plane")
        self.z0, self.radius = complex(z0), float(radius)
        self._qm: Dict[str, QuotientMetric] = {}

    def values(self, spec, frames):
        qm = self._qm.get(spec.name)
        if qm is None:
            qm = self._qm[spec.name] = QuotientMetric(spec, r_nb=3.0)
        y = math.sqrt(self.z0.imag)
        center = qm.reduce(np.array([[[y, self.z0.real / y], [0.0, 1.0 / y]]]))[0]
        red = qm.reduce(frames)
        dist = np.empty(red.shape[0])
        for lo in range(0, red.shape[0], 4096):
            dist[lo:lo + 4096] = qm.base_distance(center, red[lo:lo + 4096])
        u = np.clip(dist / self.radius, 0.0, 1.0)
        return (1.0 - u * u) ** 2

    def describe(self):
        return {"name": self.name, "z0": [self.z0.real, self.z0.imag], "radius": self.radius}


def builtin(name: str, Y: float = 2.0, **kw) -> TestFunction:
    name = name.lower()
    if name == "cusp":
        return CuspIndicator(Y)
    if name == "height":
        return HeightPower(Y, kw.get("sigma", 1.0))
    if name == "bump":
        return Bump(complex(kw.get("z0", 1j)), kw.get("radius", 0.5))
    if name in ("one", "const"):
        return Constant(kw.get("c", 1.0))
    raise ValueError(f"unknown test function {name!r}")


def average(spec: GroupSpec, mu: EmpiricalMeasure, f: TestFunction) -> float:
    vals = f.values(spec, mu.frames)
    return float(math.fsum(mu.weights * vals) / mu.total_weight)


# --------------------------------------------------------------------------
# excursion statistics


def profiles(spec: GroupSpec, census: Sequence[ClosedGeodesic], Y: float,
             threads: int = 1) -> List[ExcursionProfile]:
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(lambda g: excursion_profile(spec, g, Y), census))
    return [excursion_profile(spec, g, Y) for g in census]


def _census(spec: GroupSpec, T: float, census: Optional[Sequence[ClosedGeodesic]]):
    if census is None:
        return enumerate_closed_geodesics(spec, T, primitive_only=True)
    return [g for g in census if g.length <= T + 1e-9]


def escape_mass_curve(spec: GroupSpec, T: float, Y_grid: Sequence[float],
                      census: Optional[Sequence[ClosedGeodesic]] = None) -> List[Tuple[float, float]]:
    """(Y, mu_T(height >= Y)) with mu_T the equal-weight average of the orbit measures."""
    census = _census(spec, T, census)
    if not census:
        raise EmptyInput(f"empty census at T = {T}")
    out = []
    for Y in sorted(Y_grid):
        fr = [p.total_fraction for p in profiles(spec, census, Y)]
        out.append((float(Y), float(math.fsum(fr) / len(fr))))
    return out


@dataclass
class RateFit:
    grid: List[Tuple[float, float]]
    slope: float
    intercept: float
    residual: float
    label: str = ""

    def to_dict(self) -> dict:
        return {"label": self.label, "grid": [list(p) for p in self.grid], "slope": self.slope,
                "intercept": self.intercept, "residual": self.residual}


def fit_rate(xs: Sequence[float], counts: Sequence[float], label: str = "") -> RateFit:
    """Least-squares slope of log(count) against x over the positive counts."""
    grid = sorted((float(x), float(c)) for x, c in zip(xs, counts))
    pos = [(x, c) for x, c in grid if c > 0]
    if len(pos) < 2:
        return RateFit(grid, -math.inf, -math.inf, 0.0, label)
    x = np.array([p[0] for p in pos])
    y = np.log([p[1] for p in pos])
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    res = float(np.sum((y - A @ coef) ** 2))
    return RateFit(grid, float(coef[0]), float(coef[1]), res, label)


@dataclass
class BetaTails:
    fits: Dict[float, RateFit]
    bounds: Dict[float, float]
    delta_hat: float
    r_max: int
    slack: float

    @property
    def passed(self) -> bool:
        return all(self.fits[b].slope <= self.bounds[b] for b in self.fits)

    def strictly_decreasing(self) -> bool:
        rates = [self.fits[b].slope for b in sorted(self.fits)]
        return all(b < a for a, b in zip(rates, rates[1:]))

    def table(self) -> List[dict]:
        return [{"beta": b, "counts": [c for _, c in f.grid], "rate": f.slope, "bound": self.bounds[b]}
                for b, f in sorted(self.fits.items())]


def beta_tail_counts(spec: GroupSpec, T: float, Y: float, beta_grid: Sequence[float],
                     delta_hat: Optional[float] = None, census: Optional[Sequence[ClosedGeodesic]] = None,
                     slack: float = BETA_SLACK) -> BetaTails:
    """Counts of classes spending a fraction >= beta above height Y, at T-2, T-1, T,
    with the fitted exponential rate per beta."""
    if T - 2 <= 0:
        raise InsufficientData("need T > 2 for the three-point rate fit")
    census = _census(spec, T, census)
    if not census:
        raise InsufficientData(f"empty census at T = {T}")
    delta = delta_hat if delta_hat is not None else spec.delta_hint
    if delta is None:
        raise InsufficientData("no critical exponent estimate supplied")
    prof = profiles(spec, census, Y)
    lengths = np.array([g.length for g in census])
    frac = np.array([p.total_fraction for p in prof])
    Ts = [T - 2, T - 1, T]
    fits, bounds = {}, {}
    for b in sorted(beta_grid):
        counts = [int(np.count_nonzero((lengths <= t + 1e-9) & (frac >= b - 1e-12))) for t in Ts]
        fits[float(b)] = fit_rate(Ts, counts, f"beta={b:g}")
        bounds[float(b)] = delta - (2 * delta - spec.r_max) * b / 2 + slack
    return BetaTails(fits, bounds, float(delta), spec.r_max, slack)


# --------------------------------------------------------------------------
# entropy experiments


def fudge(Y: float) -> float:
    """2 log log(2Y) / log(2Y), the modeled correction term."""
    L = math.log(2 * Y)
    return 2.0 * math.log(L) / L


def _sample(mu: EmpiricalMeasure, size: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    n = len(mu)
    if n <= size:
        return np.arange(n)
    p = mu.weights / mu.weights.sum()
    return np.sort(rng.choice(n, size=size, replace=False, p=p))


def entropy_bound_check(spec: GroupSpec, mu: EmpiricalMeasure, Y: float, n: int = 6, eps: float = 0.5,
                        delta_hat: Optional[float] = None, sample_size: int = 2000, seed: int = 0,
                        slack: float = ENTROPY_SLACK) -> dict:
    """Separated-set entropy estimate of ``mu`` against the cusp-mass bound."""
    if n < 1 or len(mu) == 0:
        raise InsufficientData("need n >= 1 and a nonempty measure")
    delta = delta_hat if delta_hat is not None else spec.delta_hint
    if delta is None:
        raise InsufficientData("no critical exponent estimate supplied")
    idx = _sample(mu, sample_size, seed)
    count = separated_count(list(mu.frames[idx]), n, eps, spec=spec)
    lhs = math.log(count) / n
    cusp_mass = {}
    rhs = delta + fudge(Y)
    for c in spec.cusps:
        m = average(spec, mu, CuspIndicator(Y))
        cusp_mass[c.rank] = m
        rhs -= (2 * delta - c.rank) / 2 * m
    return {
        "lhs": lhs,
        "rhs": rhs,
        "separated": count,
        "sampled": int(idx.shape[0]),
        "cusp_mass": {str(k): v for k, v in cusp_mass.items()},
        "fudge": fudge(Y),
        "delta_hat": delta,
        "slack": slack,
        "passed": bool(lhs <= rhs + slack),
        "note": "fudge(Y) models the correction term under the Y <-> eps dictionary",
    }


def eps_from_height(Y: float, l_min: float = 1.0) -> float:
    return 2.0 * math.asinh(l_min / (2.0 * Y))


def itinerary_count_bound(Y: float, N: int, l_min: float = 1.0, factor: float = 4.0) -> float:
    L = abs(math.log(eps_from_height(Y, l_min)))
    return factor * L ** 3 * math.exp(3 * math.log(L) / L * N)


def covering_number_experiment(spec: GroupSpec, Y: float, N: int, sample_size: int = 3000,
                               T: float = 10.0, eta: float = ETA, delta_hat: Optional[float] = None,
                               seed: int = 0, census: Optional[Sequence[ClosedGeodesic]] = None,
                               slack: float = COVER_SLACK, samples_per_unit_length: int = 10) -> dict:
    """Greedy Bowen (N, eta) cover counts of sampled frames, grouped by itinerary."""
    if N > COVER_N_MAX:
        raise BudgetExceeded(f"N = {N} above the cost guard {COVER_N_MAX}")
    delta = delta_hat if delta_hat is not None else spec.delta_hint
    census = _census(spec, T, census)
    mu = geodesic_measure(spec, census, samples_per_unit_length)
    idx = _sample(mu, sample_size, seed)
    frames = mu.frames[idx]
    values, _ = itinerary_many(spec, frames, N, Y)
    groups: Dict[str, List[int]] = defaultdict(list)
    for k, row in enumerate(values):
        groups["".join(map(str, row))].append(k)
    times = np.arange(-N, N + 1)
    rows = []
    for key in sorted(groups):
        members = groups[key]
        count = separated_count(list(frames[members]), 2 * N + 1, eta, spec=spec, times=times)
        v = np.array([int(ch) for ch in key])
        bound = delta
        for i in range(1, spec.r_max + 1):
            bound -= (2 * delta - i) / 2 * np.count_nonzero(v == i) / (2 * N + 1)
        est = math.log(count) / (2 * N + 1)
        rows.append({"itinerary": key, "cusp_times": int(np.count_nonzero(v)), "samples": len(members),
                     "cover": count, "exponent": est, "bound": bound,
                     "passed": bool(est <= bound + slack)})
    by_k: Dict[int, List[float]] = defaultdict(list)
    for r in rows:
        by_k[r["cusp_times"]].append(r["exponent"])
    trend = [(k, float(np.mean(v)), len(v)) for k, v in sorted(by_k.items())]
    means = [m for _, m, _ in trend]
    strict = all(b <= a for a, b in zip(means, means[1:]))
    # decrease on average: sample-weighted regression slope of exponent on cusp time
    ks = np.array([r["cusp_times"] for r in rows], dtype=float)
    ex = np.array([r["exponent"] for r in rows])
    wt = np.array([r["samples"] for r in rows], dtype=float)
    if np.ptp(ks) > 0:
        km = np.average(ks, weights=wt)
        slope = float(np.sum(wt * (ks - km) * (ex - np.average(ex, weights=wt)))
                      / np.sum(wt * (ks - km) ** 2))
    else:
        slope = 0.0
    zero = [m for k, m, _ in trend if k == 0]
    monotone = slope < 0 and (not zero or all(m < zero[0] for k, m, _ in trend if k > 0))
    n_it = len(rows)
    it_bound = itinerary_count_bound(Y, N)
    return {
        "rows": rows,
        "trend": trend,
        "monotone": bool(monotone),
        "trend_slope": slope,
        "strictly_monotone_bins": bool(strict),
        "itineraries": n_it,
        "itinerary_bound": it_bound,
        "slack": slack,
        "eta": eta,
        "passed": bool(all(r["passed"] for r in rows)),
    }
