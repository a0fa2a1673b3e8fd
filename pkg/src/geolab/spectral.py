"""Poincare series, critical exponent estimates and Patterson-Sullivan atoms."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import CoincidentEndpoints, InsufficientData
from .groups import GroupSpec, OrbitBall, enumerate_orbit
from .isometry import (
    BoundaryPoint,
    boundary_from_hyperboloid,
    boundary_to_hyperboloid,
    lorentz_inner,
    sl2_to_so12,
)

ANNULUS_WIDTH = 0.5


class DeltaMethod(str, Enum):
    ORBIT_COUNT = "orbit_count"
    ANNULUS = "annulus"


@dataclass
class SeriesEstimate:
    s: float
    r: float
    partial_sum: float
    annulus_sums: List[Tuple[float, float]]


@dataclass
class DeltaEstimate:
    delta_hat: float
    ci_low: float
    ci_high: float
    method: DeltaMethod
    r_window: Tuple[float, float]
    table: List[Tuple[float, float]] = field(default_factory=list)
    intercept: float = 0.0

    @property
    def half_width(self) -> float:
        return 0.5 * (self.ci_high - self.ci_low)

    def to_dict(self) -> dict:
        return {
            "delta_hat": self.delta_hat,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "method": self.method.value,
            "r_window": list(self.r_window),
            "ci_note": "2x regression standard error (heuristic)",
        }


@dataclass
class AtomMeasure:
    atoms: List[Tuple[BoundaryPoint, float]]
    normalization: float

    @property
    def total_mass(self) -> float:
        return float(sum(w for _, w in self.atoms) / self.normalization)


def _ball(spec, o, r, ball):
    if ball is not None:
        if ball.radius + 1e-12 < r:
            raise ValueError(f"orbit ball of radius {ball.radius} cannot serve radius {r}")
        return ball
    return enumerate_orbit(spec, o, r)


def poincare_partial(spec: GroupSpec, o=None, s: float = 1.0, r: float = 6.0,
                     ball: Optional[OrbitBall] = None) -> SeriesEstimate:
    """Truncated series sum over the orbit ball, with sums per annulus of width 0.5."""
    ball = _ball(spec, o, r, ball)
    disp = ball.displacement[ball.displacement <= r + 1e-12]
    terms = np.exp(-s * disp)
    bins = np.floor(disp / ANNULUS_WIDTH).astype(int)
    nbins = int(math.ceil(r / ANNULUS_WIDTH)) + 1
    sums = np.bincount(bins, weights=terms, minlength=nbins)
    annuli = [(k * ANNULUS_WIDTH, float(v)) for k, v in enumerate(sums) if k * ANNULUS_WIDTH <= r]
    return SeriesEstimate(float(s), float(r), float(math.fsum(terms)), annuli)


def _linfit(x: np.ndarray, y: np.ndarray):
    n = x.shape[0]
    A = np.vstack([x, np.ones(n)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    dof = max(n - 2, 1)
    s2 = float(resid @ resid) / dof
    sxx = float(np.sum((x - x.mean()) ** 2))
    se = math.sqrt(s2 / sxx) if sxx > 0 else float("inf")
    return float(coef[0]), float(coef[1]), se


def delta_from_ball(ball: OrbitBall, r_window: Tuple[float, float],
                    method: DeltaMethod = DeltaMethod.ORBIT_COUNT) -> DeltaEstimate:
    lo, hi = r_window
    if hi > ball.radius + 1e-12:
        raise InsufficientData(f"window end {hi} beyond enumerated radius {ball.radius}")
    method = DeltaMethod(method)
    if method is DeltaMethod.ORBIT_COUNT:
        radii = np.arange(math.ceil(lo), math.floor(hi) + 1, dtype=float)
        if radii.shape[0] < 4:
            raise InsufficientData("need at least 4 integer radii in the window")
        counts = ball.count_within(radii).astype(float)
        x = radii
    else:
        edges = np.arange(lo, hi + 1e-9, ANNULUS_WIDTH)
        if edges.shape[0] < 5:
            raise InsufficientData("need at least 4 annuli in the window")
        cum = ball.count_within(edges).astype(float)
        counts = np.diff(cum)
        x = edges[:-1] + ANNULUS_WIDTH / 2
    if np.any(counts <= 0):
        raise InsufficientData("empty radius bins in the fit window")
    slope, intercept, se = _linfit(x, np.log(counts))
    table = [(float(a), float(b)) for a, b in zip(x, counts)]
    return DeltaEstimate(slope, slope - 2 * se, slope + 2 * se, method, (float(lo), float(hi)),
                         table, intercept)


def estimate_delta(spec: GroupSpec, o=None, r_window: Tuple[float, float] = (7.0, 12.0),
                   method: DeltaMethod = DeltaMethod.ORBIT_COUNT,
                   ball: Optional[OrbitBall] = None) -> DeltaEstimate:
    """Least-squares growth rate of orbit counts (or annulus counts) over ``r_window``.

    The confidence interval is twice the regression standard error, a
    heuristic rather than a finite-radius error bound.
    """
    lo, hi = r_window
    if hi - lo < 3:
        raise InsufficientData("fit window must have width at least 3")
    ball = _ball(spec, o, hi, ball)
    return delta_from_ball(ball, r_window, method)


def counting_constant(ball: OrbitBall, est: DeltaEstimate) -> float:
    """Smallest B with N(r) <= B exp(delta_hat r) at every integer radius of the ball."""
    radii = np.arange(1, math.floor(ball.radius) + 1, dtype=float)
    counts = ball.count_within(radii)
    return float(np.max(counts * np.exp(-est.delta_hat * radii)))


def _direction(x: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Null vector at the end of the geodesic ray from x through p (d = 2 or 3)."""
    # unit tangent at x toward p: component of p orthogonal to x
    c = -lorentz_inner(x, p)
    v = p - c * x
    n = math.sqrt(max(float(lorentz_inner(v, v)), 0.0))
    if n == 0.0:
        raise ValueError("direction from a point to itself is undefined")
    return x + v / n


def ps_atoms(spec: GroupSpec, x, y, s: float, r: float, delta_hint: Optional[float] = None) -> AtomMeasure:
    """Finite-s Patterson-Sullivan atoms seen from x, normalized by the partial g_s(y, y).

    Atoms sit at the boundary directions (from ``x``) of the orbit points
    ``g y`` with ``d(x, g y) <= r``; the normalization sums ``exp(-s d(y, g y))``
    over the same truncation radius.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    delta = delta_hint if delta_hint is not None else spec.delta_hint
    if delta is not None and s <= delta:
        warnings.warn(f"s = {s} is not above the critical exponent estimate {delta}")
    dxy = math.acosh(max(-float(lorentz_inner(x, y)), 1.0))
    ball = enumerate_orbit(spec, y, r + dxy)
    mats = sl2_to_so12(ball.matrices.astype(float))
    pts = mats @ y
    dist = np.arccosh(np.maximum(-lorentz_inner(pts, np.broadcast_to(x, pts.shape)), 1.0))
    keep = dist <= r + 1e-12
    atoms = []
    for p, dd in zip(pts[keep], dist[keep]):
        if dd < 1e-12:
            # the orbit point coincides with x; park the atom at e_d direction
            b = BoundaryPoint.infinity()
        else:
            b = boundary_from_hyperboloid(_direction(x, p))
        atoms.append((b, float(math.exp(-s * dd))))
    norm_terms = np.exp(-s * ball.displacement[ball.displacement <= r + 1e-12])
    return AtomMeasure(atoms, float(math.fsum(norm_terms)))


def ball_model_point(b: BoundaryPoint, d: int = 2) -> np.ndarray:
    """Boundary point on the unit sphere of the ball model."""
    return boundary_to_hyperboloid(b, d)[1:]


def bm_density(eta_minus: BoundaryPoint, eta_plus: BoundaryPoint, delta: float, d: int = 2) -> float:
    """Bowen-Margulis density factor ``|eta_+ - eta_-|^(-2 delta)`` in the ball model."""
    p = ball_model_point(eta_minus, d)
    q = ball_model_point(eta_plus, d)
    gap = float(np.linalg.norm(p - q))
    if gap <= 1e-12:
        raise CoincidentEndpoints("endpoints coincide")
    return gap ** (-2.0 * delta)
