"""Cusp geometry along the frame flow: reduction, horoball regions, excursions,
Bowen balls and separated sets.

Everything here is for the d = 2 presets.  Frames are handled as SL(2, R)
stacks internally; the public functions accept :class:`Isometry` frames.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ModelViolation, NonTerminating, UnsupportedGroup
from .groups import ClosedGeodesic, CuspSpec, Family, GroupSpec, enumerate_orbit
from .isometry import (
    METRIC_GRID,
    Frame,
    Isometry,
    _pairwise_distance,
    frame_distance,
    flow,
    sl2_to_so12,
)

REDUCE_MAX_STEPS = 10_000
EDGE_TOL = 1e-12
# below height 1 the modular horoball translates overlap
Y_MIN = 1.0
EXCURSION_STEP = 0.05
DEBUG = bool(os.environ.get("GEOLAB_DEBUG"))


@dataclass(frozen=True)
class HoroRegion:
    cusp: CuspSpec
    Y: float
    y_min: float = Y_MIN

    def __post_init__(self):
        if not self.Y >= self.y_min:
            raise ModelViolation(f"horoball height {self.Y} below the floor {self.y_min}")


def height_from_eps(eps: float, l_min: float = 1.0) -> float:
    """Horoball height matching a thin-part parameter eps (constants dropped)."""
    return l_min / (2.0 * math.sinh(eps / 2.0))


@dataclass
class Itinerary:
    values: np.ndarray  # V(m) for m = -N..N
    h: float
    Y: float
    crossings: List[float] = field(default_factory=list)

    @property
    def N(self) -> int:
        return (len(self.values) - 1) // 2

    def cusp_times(self) -> int:
        return int(np.count_nonzero(self.values))

    def key(self) -> str:
        return "".join(str(int(v)) for v in self.values)


@dataclass(frozen=True)
class Excursion:
    t_in: float
    t_out: float
    max_height: float
    cusp_id: int = 0

    @property
    def duration(self) -> float:
        return self.t_out - self.t_in


@dataclass
class ExcursionProfile:
    excursions: List[Excursion]
    total_fraction: float
    period: float
    key: str = ""
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "class_key": self.key,
            "period": self.period,
            "total_fraction": self.total_fraction,
            "excursions": [
                {"t_in": e.t_in, "t_out": e.t_out, "max_height": e.max_height} for e in self.excursions
            ],
        }


# --------------------------------------------------------------------------
# fundamental-domain reduction


def _width(spec: GroupSpec) -> Optional[float]:
    if spec.family is Family.MODULAR:
        return 1.0
    if spec.family is Family.HECKE:
        return float(spec.params["lambda"])
    return None


def _check_strategy(spec: GroupSpec) -> None:
    if spec.family not in (Family.MODULAR, Family.HECKE, Family.SCHOTTKY):
        raise UnsupportedGroup(f"no reduction strategy for family {spec.family.value!r}")


def _as_complex(z) -> complex:
    if isinstance(z, (complex, float, int)):
        z = complex(z)
    else:
        arr = np.asarray(z, dtype=float)
        z = complex(arr[0], arr[1])
    if not z.imag > 0:
        raise ModelViolation(f"point {z} is not in the upper half plane")
    return z


def reduce(spec: GroupSpec, z) -> Tuple[np.ndarray, str]:
    """Move ``z`` into the closed fundamental domain.

    Returns ``(point, word)`` with ``word . z == point``; ``point`` is
    ``[Re, Im]``.
    """
    _check_strategy(spec)
    z = _as_complex(z)
    letters: List[str] = []
    lam = _width(spec)
    for _ in range(REDUCE_MAX_STEPS):
        if lam is not None:
            if abs(z.real) > lam / 2 + EDGE_TOL:
                n = math.floor(z.real / lam + 0.5)
                z = complex(z.real - n * lam, z.imag)
                letters.insert(0, ("t" if n > 0 else "T") * abs(n))
                continue
            if abs(z) ** 2 < 1.0 - EDGE_TOL:
                z = -1.0 / z
                letters.insert(0, "S")
                continue
            break
        hit = None
        for lab, (c, r) in spec.params["disks"].items():
            if abs(z - c) < r * (1 - EDGE_TOL):
                hit = lab
                break
        if hit is None:
            break
        inv = spec.inverses[hit]
        z = _mobius_c(spec.generators[inv], z)
        letters.insert(0, inv)
    else:
        raise NonTerminating(f"reduction did not settle in {REDUCE_MAX_STEPS} steps")
    return np.array([z.real, z.imag]), "".join(letters)


def _mobius_c(g, z: complex) -> complex:
    (a, b), (c, d) = g
    return (a * z + b) / (c * z + d)


def reduce_many(spec: GroupSpec, z: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorized reduction of complex points.

    Returns ``(reduced, mats)`` where ``mats[k]`` (SL2, float) sends ``z[k]``
    to ``reduced[k]``.
    """
    _check_strategy(spec)
    z = np.array(z, dtype=complex).reshape(-1)
    if np.any(z.imag <= 0):
        raise ModelViolation("points must lie in the upper half plane")
    n = z.shape[0]
    mats = np.zeros((n, 2, 2))
    mats[:, 0, 0] = mats[:, 1, 1] = 1.0
    lam = _width(spec)
    for _ in range(REDUCE_MAX_STEPS):
        changed = False
        if lam is not None:
            sh = np.abs(z.real) > lam / 2 + EDGE_TOL
            if sh.any():
                k = np.floor(z.real[sh] / lam + 0.5)
                z[sh] -= k * lam
                mats[sh, 0, :] -= (k * lam)[:, None] * mats[sh, 1, :]
                changed = True
            inv = np.abs(z) ** 2 < 1.0 - EDGE_TOL
            inv &= np.abs(z.real) <= lam / 2 + EDGE_TOL
            if inv.any():
                z[inv] = -1.0 / z[inv]
                top = mats[inv, 0, :].copy()
                mats[inv, 0, :] = -mats[inv, 1, :]
                mats[inv, 1, :] = top
                changed = True
        else:
            for lab, (c, r) in spec.params["disks"].items():
                m = np.abs(z - c) < r * (1 - EDGE_TOL)
                if m.any():
                    g = np.array(spec.generators[spec.inverses[lab]], dtype=float)
                    (a, b), (cc, d) = g
                    z[m] = (a * z[m] + b) / (cc * z[m] + d)
                    mats[m] = np.einsum("ij,njk->nik", g, mats[m])
                    changed = True
        if not changed:
            return z, mats
    raise NonTerminating(f"reduction did not settle in {REDUCE_MAX_STEPS} steps")


def in_fundamental_domain(spec: GroupSpec, z: complex, tol: float = 1e-9) -> bool:
    lam = _width(spec)
    if lam is not None:
        return abs(z.real) <= lam / 2 + tol and abs(z) >= 1 - tol
    return all(abs(z - c) >= r - tol for c, r in spec.params["disks"].values())


def cusp_membership(spec: GroupSpec, z, region: HoroRegion) -> bool:
    """True iff the (already reduced) point sits at height >= Y."""
    z = _as_complex(z)
    if DEBUG and not in_fundamental_domain(spec, z):
        raise ModelViolation(f"{z} is not reduced")
    if not region.cusp.xi.is_infinity:
        raise UnsupportedGroup("cusp regions are normalized with xi at infinity")
    return z.imag >= region.Y


def default_region(spec: GroupSpec, Y: float) -> HoroRegion:
    if not spec.cusps:
        raise UnsupportedGroup(f"{spec.name} has no cusp")
    return HoroRegion(spec.cusps[0], float(Y))


# --------------------------------------------------------------------------
# frames as SL(2, R) matrices


def frame_to_sl2(f: Frame) -> np.ndarray:
    """An SL(2, R) lift of a d = 2 frame (sign is arbitrary for inexact frames)."""
    if f.exact_2x2 is not None:
        return np.array(f.exact_2x2, dtype=float)
    if f.d != 2:
        raise UnsupportedGroup("SL(2, R) lifts exist only for d = 2")
    M = f.matrix
    a2 = 0.5 * (M[0, 0] + M[0, 2] + M[2, 0] + M[2, 2])
    b2 = 0.5 * (M[0, 0] - M[0, 2] + M[2, 0] - M[2, 2])
    ab = 0.5 * (M[0, 1] + M[2, 1])
    ac = 0.5 * (M[1, 0] + M[1, 2])
    if a2 >= b2:
        a = math.sqrt(max(a2, 0.0))
        b, c = ab / a, ac / a
        d = 0.5 * (M[1, 1] + 1.0) / a
    else:
        b = math.sqrt(max(b2, 0.0))
        a = ab / b
        d = 0.5 * (M[1, 0] - M[1, 2]) / b
        c = 0.5 * (M[1, 1] - 1.0) / b
    return np.array([[a, b], [c, d]])


def sl2_frame(g) -> Frame:
    g = np.asarray(g, dtype=float)
    return Isometry.from_sl2(tuple(tuple(float(v) for v in row) for row in g))


def flow_sl2(g: np.ndarray, t) -> np.ndarray:
    """Right multiplication by diag(e^{t/2}, e^{-t/2}); broadcasts over ``t``."""
    t = np.asarray(t, dtype=float)
    e = np.exp(t / 2.0)
    out = np.empty(np.broadcast_shapes(np.shape(g)[:-2], t.shape) + (2, 2))
    out[..., :, 0] = g[..., :, 0] * e[..., None]
    out[..., :, 1] = g[..., :, 1] / e[..., None]
    return out


def base_points_sl2(g: np.ndarray) -> np.ndarray:
    """g(i) for a stack of SL2 matrices."""
    a, b, c, d = g[..., 0, 0], g[..., 0, 1], g[..., 1, 0], g[..., 1, 1]
    return (a * 1j + b) / (c * 1j + d)


def reduce_frames(spec: GroupSpec, g: np.ndarray) -> np.ndarray:
    """Translate each frame so that its base point lies in the fundamental domain."""
    g = np.asarray(g, dtype=float).reshape(-1, 2, 2)
    _, mats = reduce_many(spec, base_points_sl2(g))
    return np.einsum("nij,njk->nik", mats, g)


def axis_frame(alpha: float, omega: float) -> np.ndarray:
    """SL2 frame at the apex of the geodesic from alpha to omega, pointing toward omega."""
    if alpha == omega:
        raise ModelViolation("degenerate axis")
    if omega > alpha:
        h = np.array([[omega, alpha], [1.0, 1.0]]) / math.sqrt(omega - alpha)
    else:
        h = np.array([[-omega, alpha], [-1.0, 1.0]]) / math.sqrt(alpha - omega)
    return h


def _axis_endpoints(g: ClosedGeodesic) -> Tuple[float, float]:
    rep, att = g.axis
    if rep.is_infinity or att.is_infinity:
        raise UnsupportedGroup("axis through infinity; conjugate the representative first")
    return float(rep.coords[0]), float(att.coords[0])


def geodesic_frames(g: ClosedGeodesic, ts) -> np.ndarray:
    """Frames along the axis of the representative at times ``ts`` (apex at t = 0)."""
    alpha, omega = _axis_endpoints(g)
    return flow_sl2(axis_frame(alpha, omega), np.asarray(ts, dtype=float))


# --------------------------------------------------------------------------
# itineraries


def itinerary_many(spec: GroupSpec, frames: np.ndarray, N: int, Y: float,
                   h: float = 1.0) -> Tuple[np.ndarray, np.ndarray]:
    """Itinerary values for a stack of SL2 frames.

    Returns ``(values, fine)`` where ``values`` has shape ``(n, 2N+1)`` and
    ``fine`` the membership on the refined grid of step ``h``.
    """
    if not 0 < h <= 1:
        raise ValueError("h must lie in (0, 1]")
    region = default_region(spec, Y)
    frames = np.asarray(frames, dtype=float).reshape(-1, 2, 2)
    per = max(1, int(math.ceil(1.0 / h - 1e-9)))
    ts = (np.arange(-N * per, N * per + 1) / per).astype(float)
    pts = base_points_sl2(flow_sl2(frames[:, None], ts[None, :]))
    red, _ = reduce_many(spec, pts.reshape(-1))
    fine = (red.imag >= region.Y).reshape(pts.shape)
    values = fine[:, ::per].astype(int) * region.cusp.rank
    return values, fine


def itinerary(spec: GroupSpec, start: Frame, N: int, h: float = 0.25, Y: float = 2.0) -> Itinerary:
    """V(m) for integer m in [-N, N]: cusp rank at the reduced time-m base point, else 0."""
    per = max(1, int(math.ceil(1.0 / h - 1e-9)))
    values, fine = itinerary_many(spec, frame_to_sl2(start)[None], N, Y, h)
    fine = fine[0]
    ts = np.arange(-N * per, N * per + 1) / per
    flips = np.nonzero(fine[1:] != fine[:-1])[0]
    crossings = [float(0.5 * (ts[k] + ts[k + 1])) for k in flips]
    return Itinerary(values[0], float(h), float(Y), crossings)


# --------------------------------------------------------------------------
# excursions


def _lift_geometry(mats: np.ndarray, alpha: float, omega: float):
    """Center, radius and orientation of the images of the axis under ``mats``."""
    a, b, c, d = mats[:, 0, 0], mats[:, 0, 1], mats[:, 1, 0], mats[:, 1, 1]
    p = (a * alpha + b) / (c * alpha + d)
    q = (a * omega + b) / (c * omega + d)
    return 0.5 * (p + q), 0.5 * np.abs(q - p), np.sign(q - p)


def excursion_profile(spec: GroupSpec, g: ClosedGeodesic, Y: float,
                      h: float = EXCURSION_STEP) -> ExcursionProfile:
    """Cusp excursions above height Y along one period of ``g``.

    Detection samples the period at step ``h``; each detected excursion is
    then measured on its lift: a semicircle of radius R spends
    ``2 arccosh(R / Y)`` above height Y.
    """
    meta = {"h": h, "may_miss_shorter_than": 2 * h, "Y": Y}
    if spec.family is Family.SCHOTTKY:
        return ExcursionProfile([], 0.0, g.length, g.key, meta)
    if spec.family not in (Family.MODULAR, Family.HECKE):
        raise UnsupportedGroup(f"no excursion strategy for family {spec.family.value!r}")
    region = default_region(spec, Y)
    ell = g.length
    alpha, omega = _axis_endpoints(g)
    ts = -ell / 2 + h * np.arange(int(math.ceil(ell / h)))
    frames = geodesic_frames(g, ts)
    red, mats = reduce_many(spec, base_points_sl2(frames))
    hit = red.imag >= region.Y
    excursions: List[Excursion] = []
    if hit.any():
        c, R, sgn = _lift_geometry(mats[hit], alpha, omega)
        s = sgn * np.arctanh(np.clip((red.real[hit] - c) / R, -1 + 1e-16, 1 - 1e-16))
        apex = ts[hit] - s
        apex = (apex + ell / 2) % ell - ell / 2
        order = np.argsort(apex)
        seen: List[Tuple[float, float]] = []
        for k in order:
            t0, r0 = float(apex[k]), float(R[k])
            if any(_same_apex(t0, t1, ell) and abs(r0 - r1) <= 1e-7 * r0 for t1, r1 in seen):
                continue
            seen.append((t0, r0))
            half = math.acosh(max(r0 / region.Y, 1.0))
            excursions.append(Excursion(t0 - half, t0 + half, r0, 0))
    excursions.sort(key=lambda e: e.t_in)
    total = math.fsum(e.duration for e in excursions) / ell
    return ExcursionProfile(excursions, float(min(total, 1.0)), ell, g.key, meta)


def _same_apex(t0: float, t1: float, ell: float, tol: float = 1e-6) -> bool:
    gap = abs(t0 - t1) % ell
    return min(gap, ell - gap) <= tol


def thin_part_overlaps(z: complex, Y: float, width: float = 1.0, c_max: int = 6) -> int:
    """Number of horoball translates (height Y at infinity, diameter 1/(c^2 Y) at p/c)
    containing ``z``, over the cusp images p/c with |c| <= c_max near ``z``."""
    count = 1 if z.imag >= Y else 0
    for c in range(1, c_max + 1):
        lo = math.floor((z.real - 1) * c) - 1
        for p in range(lo, lo + c + 4):
            if math.gcd(p, c) != 1:
                continue
            rad = 1.0 / (2 * c * c * Y)
            if abs(z - complex(p / c, rad)) < rad:
                count += 1
    return count


# --------------------------------------------------------------------------
# Bowen balls and separated sets


def horospherical(u, kind: str = "-", d: int = 2) -> Isometry:
    """exp of the stable (``kind='-'``) or unstable (``'+'``) horospherical generator."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if u.shape != (d - 1,):
        raise ValueError(f"u must have {d - 1} entries")
    sgn = -1.0 if kind == "-" else 1.0
    X = np.zeros((d + 1, d + 1))
    X[0, 1:d] = u
    X[1:d, 0] = u
    X[1:d, d] = sgn * u
    X[d, 1:d] = -sgn * u
    # X is nilpotent of order 3
    return Isometry(np.eye(d + 1) + X + 0.5 * X @ X)


def bowen_ball_test(f1: Frame, f2: Frame, N: int, rho: float, one_sided: bool = False) -> bool:
    """True iff the two frames stay within ``rho`` at every integer time in [-N, N]
    (in [0, N] when ``one_sided``)."""
    for n in range(0 if one_sided else -N, N + 1):
        if frame_distance(flow(f1, n), flow(f2, n)) >= rho:
            return False
    return True


def _sample_points(d: int, grid: np.ndarray) -> np.ndarray:
    pts = np.zeros((d, grid.shape[0], d + 1))
    for i in range(1, d + 1):
        pts[i - 1, :, 0] = np.cosh(grid)
        pts[i - 1, :, i] = np.sinh(grid)
    return pts


def frame_distance_sl2(A: np.ndarray, B: np.ndarray, grid: np.ndarray = METRIC_GRID) -> np.ndarray:
    """Vectorized frame distance between broadcastable SL2 stacks."""
    pts = _sample_points(2, grid)
    x = np.einsum("...ij,kgj->...kgi", sl2_to_so12(A), pts)
    y = np.einsum("...ij,kgj->...kgi", sl2_to_so12(B), pts)
    x, y = np.broadcast_arrays(x, y)
    dist = _pairwise_distance(x, y)
    return dist.max(axis=-1).sum(axis=-1)


class QuotientMetric:
    """Frame distance on the quotient, min over a finite candidate set.

    Frames are first reduced.  Candidates are coset representatives (modulo
    the cusp stabilizer for cusped presets) from an orbit ball of radius
    ``r_nb``; the horizontal translate is chosen per pair.  Only distances
    below ``cap`` are resolved exactly; larger values are reported as ``cap``.
    """

    def __init__(self, spec: GroupSpec, r_nb: float = 4.0):
        self.spec = spec
        self.lam = _width(spec)
        ball = enumerate_orbit(spec, None, r_nb)
        mats = ball.matrices.astype(float)
        if self.lam is not None:
            keep, seen = [], set()
            for k, m in enumerate(mats):
                c, d = m[1]
                if c < 0 or (c == 0 and d < 0):
                    c, d = -c, -d
                key = (round(c, 6), round(d, 6))
                if key not in seen:
                    seen.add(key)
                    keep.append(k)
            mats = mats[keep]
        self.cands = mats

    def reduce(self, frames: np.ndarray) -> np.ndarray:
        return reduce_frames(self.spec, frames)

    def _translates(self, x: np.ndarray, ys: np.ndarray) -> np.ndarray:
        """Candidate images gamma y (shape (m, C', 2, 2)) aligned with x."""
        imgs = np.einsum("cij,mjk->mcik", self.cands, ys)
        if self.lam is None:
            return imgs
        zx = base_points_sl2(x).real
        zy = base_points_sl2(imgs).real
        k = np.round((zx - zy) / self.lam)
        out = []
        for dk in (-1.0, 0.0, 1.0):
            sh = imgs.copy()
            sh[..., 0, :] += ((k + dk) * self.lam)[..., None] * sh[..., 1, :]
            out.append(sh)
        return np.concatenate(out, axis=1)

    def base_distance(self, x: np.ndarray, ys: np.ndarray) -> np.ndarray:
        """Quotient distance between base points of reduced frames x and ys[m]."""
        imgs = self._translates(x, ys)
        zx = base_points_sl2(x)
        zy = base_points_sl2(imgs)
        arg = 1.0 + np.abs(zx - zy) ** 2 / (2.0 * zx.imag * zy.imag)
        return np.arccosh(arg).min(axis=1)

    def frame_distance(self, x: np.ndarray, ys: np.ndarray, cap: float) -> np.ndarray:
        imgs = self._translates(x, ys)
        zx = base_points_sl2(x)
        zy = base_points_sl2(imgs)
        base = np.arccosh(1.0 + np.abs(zx - zy) ** 2 / (2.0 * zx.imag * zy.imag))
        out = np.full(ys.shape[0], float(cap))
        # frame distance >= 2 * base distance
        near = base < cap / 2
        for m in np.nonzero(near.any(axis=1))[0]:
            cand = imgs[m, near[m]]
            out[m] = min(cap, float(frame_distance_sl2(x, cand).min()))
        return out


def separated_count(points: Sequence[Frame], n: int, eps: float,
                    spec: Optional[GroupSpec] = None, times: Optional[Sequence[int]] = None,
                    return_indices: bool = False):
    """Greedy (n, eps)-separated subset size, in input order.

    Without ``spec`` the metric is the frame distance of the given lifts;
    with ``spec`` it is the quotient distance (see :class:`QuotientMetric`).
    ``times`` overrides the default ``0..n-1``.
    """
    if not points:
        return (0, []) if return_indices else 0
    times = np.arange(n) if times is None else np.asarray(times)
    frames = np.stack([frame_to_sl2(p) if isinstance(p, Isometry) else np.asarray(p, float)
                       for p in points])
    traj = flow_sl2(frames[:, None], times[None, :].astype(float))  # (K, n, 2, 2)
    if spec is None:
        kept = _greedy_lifted(traj, eps)
    else:
        kept = _greedy_quotient(traj, eps, QuotientMetric(spec))
    return (len(kept), kept) if return_indices else len(kept)


def _greedy_lifted(traj: np.ndarray, eps: float) -> List[int]:
    K, n = traj.shape[:2]
    pts = _sample_points(2, METRIC_GRID)
    so = sl2_to_so12(traj)
    samp = np.einsum("knij,agj->knagi", so, pts)  # (K, n, 2, G, 3)
    kept: List[int] = []
    for k in range(K):
        if kept:
            dist = _pairwise_distance(samp[kept], samp[k][None]).max(axis=-1).sum(axis=-1)
            if not np.all(dist.max(axis=1) > eps):
                continue
        kept.append(k)
    return kept


def _greedy_quotient(traj: np.ndarray, eps: float, qm: QuotientMetric) -> List[int]:
    K, n = traj.shape[:2]
    red = qm.reduce(traj.reshape(-1, 2, 2)).reshape(K, n, 2, 2)
    heights = np.log(base_points_sl2(red).imag)
    kept: List[int] = []
    for k in range(K):
        ok = True
        if kept:
            pending = np.array(kept)
            if qm.lam is not None:
                # reduced heights are orbit maxima, so |log y1/y2| bounds the base distance
                gap = np.abs(heights[pending] - heights[k][None]).max(axis=1)
                pending = pending[gap <= eps / 2]
            for i in range(n):
                if pending.size == 0:
                    break
                dist = qm.frame_distance(red[k, i], red[pending, i], cap=2 * eps + 1)
                pending = pending[dist <= eps]
            ok = pending.size == 0
        if ok:
            kept.append(k)
    return kept
