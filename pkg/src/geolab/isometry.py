"""Points, boundary points, frames and isometries of hyperbolic space.

Points live on the hyperboloid ``q(x) = -1, x0 > 0`` with
``q(x) = -x0**2 + x1**2 + ... + xd**2``.  In the upper half space chart the
last coordinate is the vertical one, so the flow ``a_t`` moves the base
point ``e0`` straight up: ``a_t e0 = (cosh t, 0, ..., sinh t)`` corresponds
to ``(0, ..., 0, e**t)``.

A frame is an isometry ``g``; its base point is ``g e0``, its flow direction
is ``g e_d`` and its remaining vectors are ``g e_1, ..., g e_{d-1}``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .errors import ModelViolation, NearDegenerate, NotLoxodromic


@dataclass(frozen=True)
class Tolerances:
    model: float = 1e-9
    classify: float = 1e-7


DEFAULT_TOL = Tolerances()
RENORM_EVERY = 16
# sample times for the sup in the unit tangent metric
METRIC_GRID = np.linspace(-1.0, 1.0, 33)


def lorentz_form(d: int) -> np.ndarray:
    return np.diag([-1.0] + [1.0] * d)


def lorentz_inner(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return -x[..., 0] * y[..., 0] + np.sum(x[..., 1:] * y[..., 1:], axis=-1)


def base_point(d: int) -> np.ndarray:
    e0 = np.zeros(d + 1)
    e0[0] = 1.0
    return e0


def check_hpoint(x, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    """Return ``x`` as a float array after checking it lies on the hyperboloid."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] < 3:
        raise ModelViolation(f"bad point shape {x.shape}")
    scale = max(1.0, x[0] * x[0])
    if x[0] <= 0 or abs(lorentz_inner(x, x) + 1.0) > tol.model * scale:
        raise ModelViolation(f"point off the hyperboloid: q={lorentz_inner(x, x)!r}")
    return x


# --------------------------------------------------------------------------
# boundary points


@dataclass(frozen=True)
class BoundaryPoint:
    """A point of the sphere at infinity: finite (upper half space chart) or infinity."""

    coords: Optional[tuple] = None

    @classmethod
    def infinity(cls) -> "BoundaryPoint":
        return cls(None)

    @classmethod
    def finite(cls, u) -> "BoundaryPoint":
        u = np.atleast_1d(np.asarray(u, dtype=float))
        return cls(tuple(float(v) for v in u))

    @property
    def is_infinity(self) -> bool:
        return self.coords is None

    def as_array(self) -> np.ndarray:
        if self.coords is None:
            raise ValueError("infinity has no finite coordinates")
        return np.array(self.coords)

    def to_json(self):
        return "inf" if self.coords is None else list(self.coords)

    def __repr__(self):
        return "BoundaryPoint(inf)" if self.coords is None else f"BoundaryPoint({self.coords})"


def boundary_to_hyperboloid(b: BoundaryPoint, d: int) -> np.ndarray:
    """Null vector for ``b`` normalized to ``x0 = 1``."""
    v = np.zeros(d + 1)
    if b.is_infinity:
        v[0] = 1.0
        v[d] = 1.0
        return v
    u = b.as_array()
    if u.shape[0] != d - 1:
        raise ValueError(f"boundary point has {u.shape[0]} coordinates, expected {d - 1}")
    n2 = float(u @ u)
    v[0] = 1.0 + n2
    v[1:d] = 2.0 * u
    v[d] = n2 - 1.0
    return v / v[0]


def boundary_from_hyperboloid(v, tol: float = 1e-9) -> BoundaryPoint:
    v = np.asarray(v, dtype=float)
    if v[0] < 0:
        v = -v
    d = v.shape[0] - 1
    gap = v[0] - v[d]
    if abs(gap) <= tol * abs(v[0]):
        return BoundaryPoint.infinity()
    return BoundaryPoint.finite(v[1:d] / gap)


# --------------------------------------------------------------------------
# chart changes


def to_hyperboloid(p, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    """Upper half space point ``(u_1, ..., u_{d-1}, y)`` to the hyperboloid."""
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.shape[0] < 2:
        raise ModelViolation(f"bad upper half space point {p!r}")
    y = p[-1]
    if not y > 0:
        raise ModelViolation(f"height must be positive, got {y!r}")
    u = p[:-1]
    n2 = float(u @ u) + y * y
    x = np.empty(p.shape[0] + 1)
    x[0] = (1.0 + n2) / (2.0 * y)
    x[1:-1] = u / y
    x[-1] = (n2 - 1.0) / (2.0 * y)
    return x


def to_upper_half(x, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    x = check_hpoint(x, tol)
    gap = x[0] - x[-1]
    if gap <= 0:
        raise ModelViolation("point maps to infinity")
    y = 1.0 / gap
    out = np.empty(x.shape[0] - 1)
    out[:-1] = x[1:-1] * y
    out[-1] = y
    return out


def uhp_to_complex(p) -> complex:
    return complex(p[0], p[1])


def complex_to_hyperboloid(z: complex) -> np.ndarray:
    return to_hyperboloid([z.real, z.imag])


# --------------------------------------------------------------------------
# SL(2) -> SO+(1,d)


def sl2_to_so12(g) -> np.ndarray:
    """Image of a real 2x2 matrix of determinant 1 in SO+(1,2).

    Accepts a single ``(2, 2)`` matrix or a stack ``(..., 2, 2)``.
    """
    g = np.asarray(g, dtype=float)
    a, b, c, d = g[..., 0, 0], g[..., 0, 1], g[..., 1, 0], g[..., 1, 1]
    out = np.empty(g.shape[:-2] + (3, 3))
    out[..., 0, 0] = 0.5 * (a * a + b * b + c * c + d * d)
    out[..., 1, 0] = a * c + b * d
    out[..., 2, 0] = 0.5 * (a * a + b * b - c * c - d * d)
    out[..., 0, 1] = a * b + c * d
    out[..., 1, 1] = a * d + b * c
    out[..., 2, 1] = a * b - c * d
    out[..., 0, 2] = 0.5 * (a * a - b * b + c * c - d * d)
    out[..., 1, 2] = a * c - b * d
    out[..., 2, 2] = 0.5 * (a * a - b * b - c * c + d * d)
    return out


_HERM_BASIS = (
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, 1j], [-1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


def sl2c_to_so13(g) -> np.ndarray:
    """Image of a complex 2x2 matrix of determinant 1 in SO+(1,3)."""
    g = np.asarray(g, dtype=complex)
    out = np.empty((4, 4))
    gh = g.conj().T
    for j, e in enumerate(_HERM_BASIS):
        p = g @ e @ gh
        out[0, j] = 0.5 * (p[0, 0] + p[1, 1]).real
        out[1, j] = p[0, 1].real
        out[2, j] = p[0, 1].imag
        out[3, j] = 0.5 * (p[0, 0] - p[1, 1]).real
    return out


def mobius(g, z):
    """Action of a 2x2 matrix on points of the upper half plane (complex)."""
    (a, b), (c, d) = g
    return (a * z + b) / (c * z + d)


def flow_matrix(d: int, t: float) -> np.ndarray:
    """The matrix ``a_t``: a boost in the ``(e0, e_d)`` plane."""
    m = np.eye(d + 1)
    ch, sh = np.cosh(t), np.sinh(t)
    m[0, 0] = m[d, d] = ch
    m[0, d] = m[d, 0] = sh
    return m


def renormalize(m: np.ndarray) -> np.ndarray:
    """Pull a near-Lorentz matrix back onto O(1,d) by one Newton-Schulz polar step."""
    d = m.shape[0] - 1
    j = lorentz_form(d)
    gram = j @ m.T @ j @ m
    return m @ (1.5 * np.eye(d + 1) - 0.5 * gram)


def lorentz_defect(m: np.ndarray) -> float:
    """Relative size of ``M^T J M - J`` (scaled by the entry size of ``M``)."""
    d = m.shape[0] - 1
    j = lorentz_form(d)
    err = np.max(np.abs(m.T @ j @ m - j))
    return float(err / max(1.0, np.max(np.abs(m)) ** 2))


# --------------------------------------------------------------------------
# isometries


def _exact_tuple(g):
    (a, b), (c, d) = g
    return ((a, b), (c, d))


def _mul2(g, h):
    (a, b), (c, d) = g
    (e, f), (p, q) = h
    return ((a * e + b * p, a * f + b * q), (c * e + d * p, c * f + d * q))


@dataclass(frozen=True, eq=False)
class Isometry:
    """An element of SO+(1,d), optionally carrying its SL(2,R) lift (d = 2)."""

    matrix: np.ndarray
    exact_2x2: Optional[tuple] = None
    depth: int = field(default=0, compare=False)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        check_isometry_matrix(m)
        if self.exact_2x2 is not None:
            if m.shape != (3, 3):
                raise ModelViolation("an exact 2x2 lift is only meaningful for d = 2")
            ref = sl2_to_so12(np.array(self.exact_2x2, dtype=float))
            if np.max(np.abs(ref - m)) > DEFAULT_TOL.model * max(1.0, np.max(np.abs(m))):
                raise ModelViolation("exact 2x2 lift disagrees with the matrix")

    @property
    def d(self) -> int:
        return self.matrix.shape[0] - 1

    @classmethod
    def identity(cls, d: int = 2) -> "Isometry":
        if d == 2:
            return cls(np.eye(3), ((1, 0), (0, 1)))
        return cls(np.eye(d + 1))

    @classmethod
    def from_sl2(cls, g) -> "Isometry":
        g = _exact_tuple(g)
        det = g[0][0] * g[1][1] - g[0][1] * g[1][0]
        scale = max(1.0, max(abs(float(v)) for row in g for v in row)) ** 2
        if abs(det - 1) > DEFAULT_TOL.model * scale:
            raise ModelViolation(f"determinant {det} != 1")
        return cls(sl2_to_so12(np.array(g, dtype=float)), g)

    @classmethod
    def from_sl2c(cls, g) -> "Isometry":
        g = np.asarray(g, dtype=complex)
        if abs(np.linalg.det(g) - 1) > DEFAULT_TOL.model * max(1.0, float(np.abs(g).max())) ** 2:
            raise ModelViolation("determinant != 1")
        return cls(sl2c_to_so13(g))

    @classmethod
    def flow(cls, t: float, d: int = 2) -> "Isometry":
        if d == 2:
            e = float(np.exp(t / 2))
            return cls(flow_matrix(2, t), ((e, 0.0), (0.0, 1.0 / e)))
        return cls(flow_matrix(d, t))

    def __matmul__(self, other: "Isometry") -> "Isometry":
        if self.exact_2x2 is not None and other.exact_2x2 is not None:
            ex = _mul2(self.exact_2x2, other.exact_2x2)
            return Isometry(sl2_to_so12(np.array(ex, dtype=float)), ex)
        m = self.matrix @ other.matrix
        depth = self.depth + other.depth + 1
        if depth >= RENORM_EVERY:
            m = renormalize(m)
            depth = 0
        return Isometry(m, None, depth)

    def inverse(self) -> "Isometry":
        if self.exact_2x2 is not None:
            (a, b), (c, d) = self.exact_2x2
            ex = ((d, -b), (-c, a))
            return Isometry(sl2_to_so12(np.array(ex, dtype=float)), ex)
        j = lorentz_form(self.d)
        return Isometry(j @ self.matrix.T @ j, None, self.depth)

    def base_point(self) -> np.ndarray:
        return self.matrix[:, 0].copy()

    def direction(self) -> np.ndarray:
        return self.matrix[:, -1].copy()

    def __repr__(self):
        if self.exact_2x2 is not None:
            return f"Isometry(exact={self.exact_2x2})"
        return f"Isometry(d={self.d})"


Frame = Isometry


def check_isometry_matrix(m: np.ndarray, tol: Tolerances = DEFAULT_TOL) -> None:
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 3:
        raise ModelViolation(f"bad isometry shape {m.shape}")
    if lorentz_defect(m) > tol.model:
        raise ModelViolation("matrix does not preserve the Lorentz form")
    if m[0, 0] <= 0:
        raise ModelViolation("matrix reverses time orientation")
    det = np.linalg.det(m)
    if abs(det - 1.0) > tol.model * max(1.0, np.max(np.abs(m)) ** 2):
        raise ModelViolation(f"determinant {det!r} != 1")


def product(isos: Sequence[Isometry], d: Optional[int] = None) -> Isometry:
    """Left-to-right product with periodic renormalization."""
    if not isos:
        return Isometry.identity(2 if d is None else d)
    out = isos[0]
    for g in isos[1:]:
        out = out @ g
    return out


def random_isometry(rng: np.random.Generator, d: int = 2, scale: float = 1.0) -> Isometry:
    """A random isometry whose displacement of e0 is of order ``scale``."""
    if d == 2:
        while True:
            g = rng.normal(scale=scale, size=(2, 2)) + np.eye(2)
            det = np.linalg.det(g)
            if det > 0.05:
                return Isometry.from_sl2(g / np.sqrt(det))
    if d == 3:
        while True:
            g = rng.normal(scale=scale, size=(2, 2)) + 1j * rng.normal(scale=scale, size=(2, 2)) + np.eye(2)
            det = np.linalg.det(g)
            if abs(det) > 0.05:
                return Isometry.from_sl2c(g / np.sqrt(det))
    raise ValueError("random isometries are provided for d in {2, 3}")


# --------------------------------------------------------------------------
# basic geometry


def apply(iso: Isometry, p, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    p = check_hpoint(p, tol)
    x = iso.matrix @ p
    return check_hpoint(x, tol)


def distance(p, q, tol: Tolerances = DEFAULT_TOL) -> float:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    c = -float(lorentz_inner(p, q))
    if c < 1.0:
        if 1.0 - c > tol.model * max(1.0, abs(p[0] * q[0])):
            raise ModelViolation(f"-<p,q> = {c!r} < 1")
    # chord form: cosh d = 1 + |p - q|^2 / 2 exactly, and unlike -<p, q> it does
    # not lose the distance to cancellation when the coordinates are large
    diff = p - q
    chord2 = max(float(lorentz_inner(diff, diff)), 0.0)
    return 2.0 * float(np.arcsinh(np.sqrt(chord2) / 2.0))


def _pairwise_distance(x, y):
    diff = x - y
    chord2 = np.maximum(lorentz_inner(diff, diff), 0.0)
    return 2.0 * np.arcsinh(np.sqrt(chord2) / 2.0)


def _tangent_samples(d: int, axis: int, grid: np.ndarray) -> np.ndarray:
    pts = np.zeros((grid.shape[0], d + 1))
    pts[:, 0] = np.cosh(grid)
    pts[:, axis] = np.sinh(grid)
    return pts


def unit_tangent_distance(f1: Frame, f2: Frame, axis: Optional[int] = None,
                          grid: np.ndarray = METRIC_GRID) -> float:
    """Grid sup of d(g1 a_t e0, g2 a_t e0) over t in [-1, 1], using frame vector ``axis``.

    The grid makes this a lower bound of the true supremum.
    """
    d = f1.d
    axis = d if axis is None else axis
    pts = _tangent_samples(d, axis, grid)
    x = pts @ f1.matrix.T
    y = pts @ f2.matrix.T
    return float(np.max(_pairwise_distance(x, y)))


def frame_distance(f1: Frame, f2: Frame, grid: np.ndarray = METRIC_GRID) -> float:
    """Sum over the d frame vectors of the unit tangent distance."""
    d = f1.d
    pts = np.concatenate([_tangent_samples(d, i, grid) for i in range(1, d + 1)])
    x = pts @ f1.matrix.T
    y = pts @ f2.matrix.T
    dist = _pairwise_distance(x, y).reshape(d, grid.shape[0])
    return float(np.sum(np.max(dist, axis=1)))


def flow(f: Frame, t: float) -> Frame:
    """Right translation by ``a_t``."""
    return f @ Isometry.flow(t, f.d)


# --------------------------------------------------------------------------
# classification


class Kind(str, Enum):
    IDENTITY = "identity"
    ELLIPTIC = "elliptic"
    PARABOLIC = "parabolic"
    LOXODROMIC = "loxodromic"


@dataclass(frozen=True)
class IsometryClass:
    kind: Kind
    translation_length: Optional[float] = None
    axis: Optional[tuple] = None  # (repelling, attracting)
    fixed_point: Optional[BoundaryPoint] = None

    def __post_init__(self):
        if self.kind is Kind.LOXODROMIC:
            if not (self.translation_length and self.translation_length > 0):
                raise ValueError("loxodromic class needs a positive length")
            if self.axis is not None and self.axis[0] == self.axis[1]:
                raise ValueError("loxodromic endpoints must differ")


def mobius_fixed_points(g):
    """Fixed points of a hyperbolic or parabolic real 2x2 matrix as BoundaryPoints.

    Returns ``(repelling, attracting)``; for a parabolic both entries agree.
    """
    (a, b), (c, d) = g
    a, b, c, d = float(a), float(b), float(c), float(d)
    tr = a + d
    disc = max(tr * tr - 4.0, 0.0)
    if c == 0:
        if a == d:
            return BoundaryPoint.infinity(), BoundaryPoint.infinity()
        finite = BoundaryPoint.finite(b / (d - a))
        # z -> (a/d) z + b/d; infinity attracts when |a| > |d|
        if abs(a) > abs(d):
            return finite, BoundaryPoint.infinity()
        return BoundaryPoint.infinity(), finite
    root = np.sqrt(disc)
    # stable quadratic formula
    s = 1.0 if (a - d) >= 0 else -1.0
    q = (a - d) + s * root
    if q != 0:
        z1 = q / (2.0 * c)
        z2 = (-2.0 * b) / q
    else:
        z1 = z2 = (a - d) / (2.0 * c)
    # a fixed point attracts when |c z + d| > 1
    if abs(c * z1 + d) > abs(c * z2 + d):
        return BoundaryPoint.finite(z2), BoundaryPoint.finite(z1)
    return BoundaryPoint.finite(z1), BoundaryPoint.finite(z2)


def _classify_exact(g, tol: Tolerances) -> IsometryClass:
    (a, b), (c, d) = g
    t = abs(a + d)
    if abs(t - 2) <= tol.classify:
        if b == 0 and c == 0 and a == d:
            return IsometryClass(Kind.IDENTITY)
        if abs(b) <= tol.classify and abs(c) <= tol.classify and abs(a - d) <= tol.classify:
            raise NearDegenerate("trace 2 matrix within tolerance of the identity")
        fp = BoundaryPoint.infinity() if c == 0 else BoundaryPoint.finite((a - d) / (2.0 * c))
        return IsometryClass(Kind.PARABOLIC, fixed_point=fp)
    if t < 2:
        if 2 - t <= 10 * tol.classify:
            raise NearDegenerate(f"|trace| = {t!r} too close to 2")
        return IsometryClass(Kind.ELLIPTIC)
    if t - 2 <= 10 * tol.classify:
        raise NearDegenerate(f"|trace| = {t!r} too close to 2")
    length = 2.0 * float(np.arccosh(t / 2.0))
    return IsometryClass(Kind.LOXODROMIC, length, mobius_fixed_points(g))


def trace_invariants(m: np.ndarray):
    """Return ``(A, B)`` with A = 2 cosh(length) and B = 2 cos(rotation).

    For d = 2 the rotation part is absent and B is reported as 2.
    """
    d = m.shape[0] - 1
    c1 = float(np.trace(m))
    if d == 2:
        return c1 - 1.0, 2.0
    if d == 3:
        c2 = 0.5 * (c1 * c1 - float(np.trace(m @ m)))
        disc = max(c1 * c1 - 4.0 * (c2 - 2.0), 0.0)
        r = np.sqrt(disc)
        return 0.5 * (c1 + r), 0.5 * (c1 - r)
    ev = np.linalg.eigvals(m)
    lam = float(np.max(np.abs(ev)))
    return lam + 1.0 / lam, 2.0


def _null_fixed_vector(m: np.ndarray, tol: Tolerances) -> np.ndarray:
    d = m.shape[0] - 1
    n = m - np.eye(d + 1)
    n2 = n @ n
    cols = np.linalg.norm(n2, axis=0)
    if cols.max() > tol.classify * max(1.0, np.abs(m).max()):
        v = n2[:, int(np.argmax(cols))]
    else:
        _, _, vt = np.linalg.svd(n)
        v = vt[-1]
    if v[0] < 0:
        v = -v
    if abs(lorentz_inner(v, v)) > 1e-6 * float(v @ v):
        raise NearDegenerate("fixed vector of a trace-2 element is not null")
    return v


def classify(iso: Isometry, tol: Tolerances = DEFAULT_TOL) -> IsometryClass:
    """Sort an isometry into identity, elliptic, parabolic or loxodromic."""
    if iso.exact_2x2 is not None:
        return _classify_exact(iso.exact_2x2, tol)
    m = iso.matrix
    d = iso.d
    eye = np.eye(d + 1)
    if np.max(np.abs(m - eye)) <= tol.model:
        return IsometryClass(Kind.IDENTITY)
    big, small = trace_invariants(m)
    gap = big - 2.0
    if gap > 10 * tol.classify:
        length = float(np.arccosh(big / 2.0))
        ev, vec = np.linalg.eig(m)
        lam = np.exp(length)
        i_out = int(np.argmin(np.abs(ev - lam)))
        i_in = int(np.argmin(np.abs(ev - 1.0 / lam)))
        omega = boundary_from_hyperboloid(vec[:, i_out].real)
        alpha = boundary_from_hyperboloid(vec[:, i_in].real)
        return IsometryClass(Kind.LOXODROMIC, length, (alpha, omega))
    if gap > tol.classify:
        raise NearDegenerate(f"trace invariant {big!r} within the guard band above 2")
    if d == 2:
        if gap < -10 * tol.classify:
            return IsometryClass(Kind.ELLIPTIC)
        if gap < -tol.classify:
            raise NearDegenerate(f"trace invariant {big!r} within the guard band below 2")
    else:
        # trace-2 in higher d: elliptic iff some timelike vector is fixed
        _, sv, vt = np.linalg.svd(m - eye)
        kernel = vt[sv <= tol.classify * max(1.0, np.abs(m).max())]
        if kernel.shape[0] >= 2 and small < 2.0 - 10 * tol.classify:
            gram = np.array([[lorentz_inner(a, b) for b in kernel] for a in kernel])
            if np.min(np.linalg.eigvalsh(gram)) < -1e-6:
                return IsometryClass(Kind.ELLIPTIC)
    v = _null_fixed_vector(m, tol)
    return IsometryClass(Kind.PARABOLIC, fixed_point=boundary_from_hyperboloid(v))


def translation_length(iso: Isometry, tol: Tolerances = DEFAULT_TOL) -> float:
    cls = classify(iso, tol)
    if cls.kind is not Kind.LOXODROMIC:
        raise NotLoxodromic(f"isometry is {cls.kind.value}")
    return cls.translation_length
