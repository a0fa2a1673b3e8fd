"""Finitely generated Fuchsian groups: presets, words, orbit balls, closed geodesics.

Three preset families are supported with exact enumeration strategies:

* ``modular``  PSL(2,Z) = Z/2 * Z/3, normal forms alternate ``S`` with ``U = ST``
  or ``V = U^-1``.  The products ``SU`` and ``SV`` are the nonnegative matrices
  ``R = [[1,1],[0,1]]`` and ``L = [[1,0],[1,1]]``, which is what makes pruning safe.
* ``hecke``    the Hecke group generated by ``z -> -1/z`` and ``z -> z + lam``
  (lam >= 2), a free product Z/2 * Z with normal forms alternating ``S`` and ``T^k``.
* ``schottky`` a free group on ``a, b`` pairing four disjoint half-planes.

Words are plain strings of one-character generator labels.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, Iterator, List, Optional, Sequence

import numpy as np

from .errors import BudgetExceeded, ConfigError, UnsupportedGroup
from .isometry import (
    DEFAULT_TOL,
    BoundaryPoint,
    Isometry,
    Kind,
    classify,
    lorentz_inner,
    mobius_fixed_points,
    sl2_to_so12,
    to_upper_half,
)

DEFAULT_BUDGET = 50_000_000
R_MAX_ENUM = 14.0
T_MAX_ENUM = {"modular": 12.0, "hecke": 12.0, "schottky": 14.0, "custom": 8.0}

_U = np.array([[0, -1], [1, 1]])
_V = np.array([[1, 1], [-1, 0]])
_S = np.array([[0, -1], [1, 0]])


class Family(str, Enum):
    SCHOTTKY = "schottky"
    MODULAR = "modular"
    HECKE = "hecke"
    CUSTOM = "custom"


@dataclass(frozen=True)
class CuspSpec:
    """A cusp: parabolic fixed point, stabilizer words, rank and shortest stabilizer translation."""

    xi: BoundaryPoint
    stabilizer_gens: tuple
    rank: int
    l_min: float


@dataclass
class GroupSpec:
    d: int
    generators: Dict[str, tuple]
    inverses: Dict[str, str]
    family: Family
    cusps: List[CuspSpec] = field(default_factory=list)
    normal_form: str = "free"
    reduction: Optional[str] = None
    delta_hint: Optional[float] = None
    params: dict = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        for g, inv in self.inverses.items():
            if g not in self.generators or inv not in self.generators:
                raise ConfigError(f"generator {g!r} lacks a registered inverse")
            if self.inverses[inv] != g:
                raise ConfigError(f"inverse table is not an involution at {g!r}")

    @property
    def r_max(self) -> int:
        return max((c.rank for c in self.cusps), default=0)

    def matrix(self, label: str) -> np.ndarray:
        return np.array(self.generators[label], dtype=float)

    def isometry(self, label: str) -> Isometry:
        return Isometry.from_sl2(self.generators[label])

    @property
    def exact(self) -> bool:
        return self.family is Family.MODULAR


# --------------------------------------------------------------------------
# presets


def modular() -> GroupSpec:
    gens = {
        "S": ((0, -1), (1, 0)),
        "T": ((1, 1), (0, 1)),
        "t": ((1, -1), (0, 1)),
        "U": ((0, -1), (1, 1)),
        "V": ((1, 1), (-1, 0)),
    }
    inverses = {"S": "S", "T": "t", "t": "T", "U": "V", "V": "U"}
    cusp = CuspSpec(BoundaryPoint.infinity(), ("T",), 1, 1.0)
    return GroupSpec(2, gens, inverses, Family.MODULAR, [cusp], "z2*z3", "modular",
                     delta_hint=1.0, name="modular")


def hecke(lam: float = 3.0) -> GroupSpec:
    lam = float(lam)
    if lam < 2.0:
        raise ConfigError("hecke presets need lambda >= 2 (free product case)")
    gens = {
        "S": ((0.0, -1.0), (1.0, 0.0)),
        "T": ((1.0, lam), (0.0, 1.0)),
        "t": ((1.0, -lam), (0.0, 1.0)),
    }
    inverses = {"S": "S", "T": "t", "t": "T"}
    cusp = CuspSpec(BoundaryPoint.infinity(), ("T",), 1, lam)
    return GroupSpec(2, gens, inverses, Family.HECKE, [cusp], "z2*z", "hecke",
                     params={"lambda": lam}, name=f"hecke:lambda={lam:g}")


def _pairing_matrix(cx, rx, cy, ry):
    # z -> cx - rx*ry/(z - cy) sends the outside of disk y onto the inside of disk x
    m = np.array([[cx, -cx * cy - rx * ry], [1.0, -cy]])
    return m / math.sqrt(rx * ry)


def schottky(centers: Sequence[float], radii: Sequence[float]) -> GroupSpec:
    """Schottky group pairing disks (a, A) and (b, B) given on the real line.

    ``centers`` and ``radii`` list the disks in the order a, A, b, B.  Each
    generator maps the outside of its inverse's disk onto its own disk.
    """
    if len(centers) != 4 or len(radii) != 4:
        raise ConfigError("schottky needs four centers and four radii (a, A, b, B)")
    labels = ("a", "A", "b", "B")
    disks = {lab: (float(c), float(r)) for lab, c, r in zip(labels, centers, radii)}
    for lab, (c, r) in disks.items():
        if r <= 0:
            raise ConfigError("radii must be positive")
    items = list(disks.items())
    for i in range(4):
        for j in range(i + 1, 4):
            (_, (c1, r1)), (_, (c2, r2)) = items[i], items[j]
            if abs(c1 - c2) <= r1 + r2:
                raise ConfigError("ping-pong disks must be pairwise disjoint")
    inverses = {"a": "A", "A": "a", "b": "B", "B": "b"}
    gens = {}
    for lab in labels:
        cx, rx = disks[lab]
        cy, ry = disks[inverses[lab]]
        m = _pairing_matrix(cx, rx, cy, ry)
        gens[lab] = tuple(tuple(float(v) for v in row) for row in m)
    return GroupSpec(2, gens, inverses, Family.SCHOTTKY, [], "free", "schottky",
                     params={"centers": tuple(centers), "radii": tuple(radii), "disks": disks},
                     name="schottky")


def schottky_symmetric(half_width: float = 0.65) -> GroupSpec:
    """Four congruent disks placed symmetrically in the disk model.

    ``half_width`` is the angular half-width (radians, < pi/4) of each disk
    seen from the disk-model center; larger disks give a larger exponent.
    """
    if not 0 < half_width < math.pi / 4:
        raise ConfigError("half_width must lie in (0, pi/4)")
    # disk-model angle theta corresponds to -cot(theta/2) on the real line
    angles = {"a": math.pi / 4, "b": 3 * math.pi / 4, "A": 5 * math.pi / 4, "B": 7 * math.pi / 4}
    centers, radii = [], []
    for lab in ("a", "A", "b", "B"):
        th = angles[lab]
        e1 = -1.0 / math.tan((th - half_width) / 2)
        e2 = -1.0 / math.tan((th + half_width) / 2)
        lo, hi = min(e1, e2), max(e1, e2)
        centers.append((lo + hi) / 2)
        radii.append((hi - lo) / 2)
    spec = schottky(centers, radii)
    spec.params["half_width"] = half_width
    spec.name = f"schottky:half_width={half_width:g}"
    return spec


SCHOTTKY_DEFAULT_HALF_WIDTH = 0.65


def preset(name: str) -> GroupSpec:
    """Build a preset from ``modular``, ``hecke:lambda=3``, ``schottky:default``,
    ``schottky:half_width=0.5`` or ``schottky:centers=c1,c2,c3,c4;radii=r1,r2,r3,r4``."""
    head, _, rest = name.strip().partition(":")
    head = head.lower()
    opts = {}
    if rest and rest != "default":
        for part in rest.split(";"):
            key, eq, val = part.partition("=")
            if not eq:
                raise ConfigError(f"bad group parameter {part!r}")
            opts[key.strip()] = val.strip()
    try:
        if head == "modular":
            if opts:
                raise ConfigError("modular takes no parameters")
            return modular()
        if head == "hecke":
            unknown = set(opts) - {"lambda"}
            if unknown:
                raise ConfigError(f"unknown hecke parameters {sorted(unknown)}")
            return hecke(float(opts.get("lambda", 3.0)))
        if head == "schottky":
            if "centers" in opts or "radii" in opts:
                centers = [float(v) for v in opts["centers"].split(",")]
                radii = [float(v) for v in opts["radii"].split(",")]
                return schottky(centers, radii)
            unknown = set(opts) - {"half_width"}
            if unknown:
                raise ConfigError(f"unknown schottky parameters {sorted(unknown)}")
            return schottky_symmetric(float(opts.get("half_width", SCHOTTKY_DEFAULT_HALF_WIDTH)))
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad group description {name!r}: {exc}") from exc
    raise ConfigError(f"unknown group family {head!r}")


# --------------------------------------------------------------------------
# words


def word_inverse(spec: GroupSpec, w: str) -> str:
    return "".join(spec.inverses[x] for x in reversed(w))


_MODULAR_RULES = {("U", "U"): "V", ("V", "V"): "U"}


def reduce_word(spec: GroupSpec, w: str) -> str:
    """Free reduction plus the family relations (S^2 = 1, U^3 = 1 for modular)."""
    stack: List[str] = []
    rules = _MODULAR_RULES if spec.family is Family.MODULAR else {}
    for x in w:
        while True:
            if stack and spec.inverses[stack[-1]] == x:
                stack.pop()
                x = ""
                break
            if stack and (stack[-1], x) in rules:
                x = rules[(stack.pop(), x)]
                continue
            break
        if x:
            stack.append(x)
    return "".join(stack)


def to_normal_form(spec: GroupSpec, w: str) -> str:
    """Rewrite a modular word over S, T, t, U, V into the S/U/V normal form."""
    if spec.family is not Family.MODULAR:
        return reduce_word(spec, w)
    expanded = w.replace("T", "SU").replace("t", "VS")
    return reduce_word(spec, expanded)


def cyclic_reduce(spec: GroupSpec, w: str) -> str:
    w = reduce_word(spec, w)
    while len(w) >= 2:
        merged = reduce_word(spec, w[-1] + w[0])
        if len(merged) >= 2:
            break
        w = reduce_word(spec, merged + w[1:-1])
    return w


def minimal_rotation(w: str) -> str:
    """Lexicographically least rotation (Booth's algorithm)."""
    n = len(w)
    if n <= 1:
        return w
    s = w + w
    f = [-1] * (2 * n)
    k = 0
    for j in range(1, 2 * n):
        i = f[j - k - 1]
        while i != -1 and s[j] != s[k + i + 1]:
            if s[j] < s[k + i + 1]:
                k = j - i - 1
            i = f[i]
        if i == -1 and s[j] != s[k + i + 1]:
            if s[j] < s[k + i + 1]:
                k = j
            f[j - k] = -1
        else:
            f[j - k] = i + 1
    return s[k:k + n]


def canonical_class_key(w: str, spec: Optional[GroupSpec] = None) -> str:
    """Conjugacy key: least rotation of the cyclically reduced word.

    Without ``spec`` the word is assumed cyclically reduced already.
    """
    if spec is not None:
        w = cyclic_reduce(spec, w)
    return minimal_rotation(w)


def word_period(w: str) -> int:
    """Smallest p dividing len(w) with w == w[:p] * (len(w) // p)."""
    n = len(w)
    for p in range(1, n + 1):
        if n % p == 0 and w[:p] * (n // p) == w:
            return p
    return n


def eval_word_2x2(spec: GroupSpec, w: str):
    """Product of generator matrices; exact integers for the modular group."""
    if spec.exact:
        m = ((1, 0), (0, 1))
        for x in w:
            (a, b), (c, d) = m
            (e, f), (p, q) = spec.generators[x]
            m = ((a * e + b * p, a * f + b * q), (c * e + d * p, c * f + d * q))
        return m
    m = np.eye(2)
    for x in w:
        m = m @ spec.matrix(x)
    return tuple(tuple(float(v) for v in row) for row in m)


def eval_word(spec: GroupSpec, w: str) -> Isometry:
    return Isometry.from_sl2(eval_word_2x2(spec, w))


def hom_eval(spec: GroupSpec, w: str, hom: Dict[str, Sequence[int]]) -> np.ndarray:
    """Exponent-sum homomorphism to Z^k evaluated on a word."""
    dims = {len(v) for v in hom.values()}
    if len(dims) != 1:
        raise ValueError("hom vectors must share one length")
    k = dims.pop()
    for g, v in hom.items():
        inv = spec.inverses.get(g)
        if inv in hom and any(a != -b for a, b in zip(v, hom[inv])):
            raise ValueError(f"hom must satisfy v(g^-1) = -v(g) at {g!r}")
    out = np.zeros(k, dtype=np.int64)
    for x in w:
        if x in hom:
            out += np.asarray(hom[x], dtype=np.int64)
        elif spec.inverses.get(x) in hom:
            out -= np.asarray(hom[spec.inverses[x]], dtype=np.int64)
    return out


def exponent_hom(spec: GroupSpec, labels: Sequence[str]) -> Dict[str, tuple]:
    """Exponent sums of the listed generators, one coordinate each."""
    k = len(labels)
    hom = {}
    for i, lab in enumerate(labels):
        v = [0] * k
        v[i] = 1
        hom[lab] = tuple(v)
        hom[spec.inverses[lab]] = tuple(-x for x in v)
    return hom


# --------------------------------------------------------------------------
# base points


def base_point_matrix(o) -> np.ndarray:
    """An SL(2,R) matrix h with h(i) equal to the hyperboloid point ``o``."""
    x, y = to_upper_half(o)
    s = math.sqrt(y)
    return np.array([[s, x / s], [0.0, 1.0 / s]])


def psl_normalize(m: np.ndarray) -> np.ndarray:
    """Fix the sign of a stack of 2x2 matrices: first nonzero of (c, d) positive."""
    m = np.array(m, copy=True)
    c, d = m[..., 1, 0], m[..., 1, 1]
    flip = (c < 0) | ((c == 0) & (d < 0))
    m[flip] *= -1
    return m


def _mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.einsum("...ij,...jk->...ik", a, b)


# --------------------------------------------------------------------------
# orbit balls


class _WordTree:
    """Parent-pointer storage for many words sharing prefixes."""

    def __init__(self):
        self.parent: List[int] = [-1]
        self.token: List[str] = [""]

    def add(self, parents: Sequence[int], tokens: Sequence[str]) -> np.ndarray:
        start = len(self.parent)
        self.parent.extend(int(p) for p in parents)
        self.token.extend(tokens)
        return np.arange(start, len(self.parent))

    def word(self, node: int) -> str:
        parts = []
        while node > 0:
            parts.append(self.token[node])
            node = self.parent[node]
        return "".join(reversed(parts))


@dataclass
class OrbitBall:
    """Group elements moving the base point at most ``radius``, sorted by displacement."""

    base: np.ndarray
    radius: float
    matrices: np.ndarray          # (N, 2, 2)
    displacement: np.ndarray      # (N,)
    _word: Callable[[int], str] = field(repr=False, default=lambda i: "")
    spec: Optional[GroupSpec] = field(default=None, repr=False)

    def __len__(self) -> int:
        return int(self.displacement.shape[0])

    def word(self, i: int) -> str:
        return self._word(i)

    def words(self) -> List[str]:
        return [self._word(i) for i in range(len(self))]

    def isometry(self, i: int) -> Isometry:
        m = self.matrices[i]
        if self.spec is not None and self.spec.exact:
            return Isometry.from_sl2(tuple(tuple(int(v) for v in row) for row in m))
        return Isometry.from_sl2(m)

    def __iter__(self) -> Iterator[tuple]:
        for i in range(len(self)):
            yield self.word(i), self.isometry(i), float(self.displacement[i])

    def count_within(self, r) -> np.ndarray:
        """Number of entries with displacement <= r (vectorized over r)."""
        return np.searchsorted(self.displacement, np.asarray(r, dtype=float) + 1e-12, side="right")

    def restrict(self, mask: np.ndarray) -> "OrbitBall":
        idx = np.flatnonzero(mask)
        word = self._word
        return OrbitBall(self.base, self.radius, self.matrices[idx], self.displacement[idx],
                         lambda i: word(int(idx[i])), self.spec)


def _displacements(mats: np.ndarray, h: np.ndarray, hinv: np.ndarray) -> np.ndarray:
    g = _mul(_mul(hinv, mats.astype(float)), h)
    ch = 0.5 * np.sum(g * g, axis=(-1, -2))
    return np.arccosh(np.maximum(ch, 1.0))


def _check_budget(n: int, budget: int) -> None:
    if n > budget:
        raise BudgetExceeded(f"orbit enumeration passed the cap of {budget} entries")


def _modular_ball(spec, o, r, budget):
    h = base_point_matrix(o)
    hinv = np.linalg.inv(h)
    kappa = float(np.sum(h * h)) / 2.0
    kappa = (kappa + math.sqrt(max(kappa * kappa - 1.0, 0.0))) ** 2  # e^{2 d(o, i)}
    sig2 = (3.0 - math.sqrt(5.0)) / 2.0  # smallest squared singular value of U and V
    bound = 2.0 * math.cosh(r) * kappa / sig2 * (1 + 1e-12) + 1e-9
    tree = _WordTree()
    # level-by-level search over products of R and L (entries only grow)
    frontier = np.array([[1, 0, 0, 1]], dtype=np.int64)
    ids = np.array([0])
    all_mats = [frontier]
    all_ids = [ids]
    total = 1
    while frontier.shape[0]:
        a, b, c, d = frontier.T
        kids = np.concatenate([
            np.stack([a, a + b, c, c + d], axis=1),
            np.stack([a + b, b, c + d, d], axis=1),
        ])
        parents = np.concatenate([ids, ids])
        tokens = ["SU"] * ids.shape[0] + ["SV"] * ids.shape[0]
        keep = np.sum(kids.astype(float) ** 2, axis=1) <= bound
        kids = kids[keep]
        parents = parents[keep]
        tokens = [t for t, k in zip(tokens, keep) if k]
        ids = tree.add(parents, tokens)
        frontier = kids
        total += kids.shape[0]
        _check_budget(total, budget)
        all_mats.append(kids)
        all_ids.append(ids)
    mids = np.concatenate(all_mats).reshape(-1, 2, 2)
    nodes = np.concatenate(all_ids)
    cosh_r = math.cosh(r) * (1 + 1e-12)
    mats, disp, refs = [], [], []
    prefixes = [("", np.eye(2, dtype=np.int64)), ("U", _U), ("V", _V)]
    suffixes = [("", np.eye(2, dtype=np.int64)), ("S", _S)]
    for pi, (pname, pm) in enumerate(prefixes):
        left = _mul(pm, mids)
        for qi, (qname, qm) in enumerate(suffixes):
            g = _mul(left, qm)
            dd = _displacements(g, h, hinv)
            keep = np.cosh(dd) <= cosh_r
            mats.append(g[keep])
            disp.append(dd[keep])
            refs.append(np.stack([nodes[keep], np.full(keep.sum(), pi), np.full(keep.sum(), qi)], axis=1))
    mats = psl_normalize(np.concatenate(mats))
    disp = np.concatenate(disp)
    refs = np.concatenate(refs)
    _check_budget(mats.shape[0], budget)

    def word(i, refs=refs):
        node, pi, qi = refs[i]
        return prefixes[pi][0] + tree.word(int(node)) + suffixes[qi][0]

    return mats, disp, word


def _hecke_ball(spec, o, r, budget):
    lam = spec.params["lambda"]
    h = base_point_matrix(o)
    hinv = np.linalg.inv(h)
    kappa = float(np.sum(h * h)) / 2.0
    kappa = (kappa + math.sqrt(max(kappa * kappa - 1.0, 0.0))) ** 2
    bound = 2.0 * math.cosh(r) * kappa * (1 + 1e-12) + 1e-9
    tree = _WordTree()
    frontier = np.eye(2)[None]
    ids = np.array([0])
    all_mats, all_ids = [frontier], [ids]
    total = 1
    while frontier.shape[0]:
        c1 = frontier[:, :, 0]
        c2 = frontier[:, :, 1]
        n1 = np.linalg.norm(c1, axis=1)
        n2 = np.linalg.norm(c2, axis=1)
        kids, parents, tokens = [], [], []
        k = 1
        while True:
            # |k lam c1 + c2| >= k lam |c1| - |c2| grows with k
            low = np.maximum(k * lam * n1 - n2, 0.0) ** 2 + n1 ** 2
            alive = low <= bound
            if not alive.any():
                break
            for sgn, letter in ((1, "T"), (-1, "t")):
                new_c1 = sgn * k * lam * c1[alive] + c2[alive]
                m = np.stack([new_c1, -c1[alive]], axis=2)
                ok = np.sum(m * m, axis=(1, 2)) <= bound
                kids.append(m[ok])
                parents.append(ids[alive][ok])
                tokens.extend([letter * k + "S"] * int(ok.sum()))
            k += 1
        if not kids:
            break
        frontier = np.concatenate(kids)
        ids = tree.add(np.concatenate(parents), tokens)
        total += frontier.shape[0]
        _check_budget(total, budget)
        all_mats.append(frontier)
        all_ids.append(ids)
    mids = np.concatenate(all_mats)
    nodes = np.concatenate(all_ids)
    cosh_r = math.cosh(r) * (1 + 1e-12)
    s = _S.astype(float)
    mats, disp, refs = [], [], []
    combos = [("", ""), ("S", ""), ("", "S"), ("S", "S")]
    for ci, (pname, qname) in enumerate(combos):
        g = mids
        if pname:
            g = _mul(s, g)
        if qname:
            g = _mul(g, s)
        # with an empty body only "" and "S" are new elements
        sel = nodes > 0 if qname else np.ones_like(nodes, dtype=bool)
        g = g[sel]
        nd = nodes[sel]
        dd = _displacements(g, h, hinv)
        keep = np.cosh(dd) <= cosh_r
        mats.append(g[keep])
        disp.append(dd[keep])
        refs.append(np.stack([nd[keep], np.full(keep.sum(), ci)], axis=1))
    mats = psl_normalize(np.concatenate(mats))
    disp = np.concatenate(disp)
    refs = np.concatenate(refs)

    def word(i, refs=refs):
        node, ci = refs[i]
        pname, qname = combos[ci]
        body = tree.word(int(node))
        if qname:
            body = body[:-1]  # trailing S S cancels
        return pname + body

    return mats, disp, word


def schottky_disk_normals(spec: GroupSpec) -> Dict[str, np.ndarray]:
    """Unit spacelike normals n with disk = {x : <x, n> > 0} on the hyperboloid."""
    out = {}
    for lab, (c, rad) in spec.params["disks"].items():
        out[lab] = half_plane_normal(c - rad, c + rad, inside=True)
    return out


def _null(u: float) -> np.ndarray:
    return np.array([1.0 + u * u, 2.0 * u, u * u - 1.0])


def half_plane_normal(e1: float, e2: float, inside: bool = True) -> np.ndarray:
    """Normal of the geodesic with real endpoints e1 < e2.

    The half-plane ``<x, n> > 0`` is the region under the semicircle when
    ``inside`` is true.
    """
    j = np.diag([-1.0, 1.0, 1.0])
    n = j @ np.cross(_null(e1), _null(e2))
    n /= math.sqrt(lorentz_inner(n, n))
    c, rad = (e1 + e2) / 2, (e2 - e1) / 2
    # hyperboloid image of c + i rad/2, a point under the semicircle
    below = np.array([1 + c * c + (rad / 2) ** 2, 2 * c, c * c + (rad / 2) ** 2 - 1]) / rad
    if (lorentz_inner(below, n) > 0) != inside:
        n = -n
    return n


def _schottky_ball(spec, o, r, budget):
    normals = schottky_disk_normals(spec)
    j = np.diag([-1.0, 1.0, 1.0])
    if any(lorentz_inner(o, n) > 0 for n in normals.values()):
        raise ConfigError("base point must lie outside the ping-pong disks")
    labels = ["a", "A", "b", "B"]
    gm = {lab: sl2_to_so12(spec.matrix(lab)) for lab in labels}
    sinh_r = math.sinh(r) * (1 + 1e-12)
    cosh_r = math.cosh(r) * (1 + 1e-12)
    tree = _WordTree()
    frontier = np.eye(3)[None]
    last = np.array([-1])
    ids = np.array([0])
    mats3 = [frontier]
    all_ids = [ids]
    total = 1
    while frontier.shape[0]:
        kids, parents, letters, kid_last = [], [], [], []
        for li, lab in enumerate(labels):
            inv_i = labels.index(spec.inverses[lab])
            ok = last != inv_i
            # every extension p x ... lies in p(D_x); skip when that half-plane is out of reach
            depth = -(frontier[ok] @ normals[lab]) @ (j @ o)
            ok_idx = np.flatnonzero(ok)[depth <= sinh_r]
            if ok_idx.size == 0:
                continue
            kids.append(frontier[ok_idx] @ gm[lab])
            parents.append(ids[ok_idx])
            letters.extend([lab] * ok_idx.size)
            kid_last.append(np.full(ok_idx.size, li))
        if not kids:
            break
        frontier = np.concatenate(kids)
        last = np.concatenate(kid_last)
        ids = tree.add(np.concatenate(parents), letters)
        total += frontier.shape[0]
        _check_budget(total, budget)
        mats3.append(frontier)
        all_ids.append(ids)
    big = np.concatenate(mats3)
    nodes = np.concatenate(all_ids)
    ch = -lorentz_inner(big @ o, o)
    keep = ch <= cosh_r
    disp = np.arccosh(np.maximum(ch[keep], 1.0))
    nodes = nodes[keep]
    words = [tree.word(int(n)) for n in nodes]
    mats = np.array([np.array(eval_word_2x2(spec, w)) for w in words]).reshape(-1, 2, 2)
    mats = psl_normalize(mats)
    return mats, disp, lambda i: words[i]


def _custom_ball(spec, o, r, budget, max_length):
    h = base_point_matrix(o)
    hinv = np.linalg.inv(h)
    seen = {}
    frontier = [("", np.eye(2))]
    cosh_r = math.cosh(r)

    def key(m):
        m = psl_normalize(m)
        return tuple(np.round(m.ravel() / 1e-7).astype(np.int64))

    seen[key(np.eye(2))] = ("", np.eye(2))
    for _ in range(max_length):
        nxt = []
        for w, m in frontier:
            for lab in spec.generators:
                if w and spec.inverses[w[-1]] == lab:
                    continue
                g = m @ spec.matrix(lab)
                kk = key(g)
                if kk in seen:
                    continue
                seen[kk] = (w + lab, g)
                nxt.append((w + lab, g))
        frontier = nxt
        _check_budget(len(seen), budget)
    words, mats = zip(*seen.values())
    mats = np.array(mats)
    disp = _displacements(mats, h, hinv)
    keep = np.cosh(disp) <= cosh_r
    words = [w for w, k in zip(words, keep) if k]
    return psl_normalize(mats[keep]), disp[keep], lambda i: words[i]


def enumerate_orbit(spec: GroupSpec, o=None, r: float = 6.0, budget: int = DEFAULT_BUDGET,
                    r_max: float = R_MAX_ENUM, max_length: int = 12) -> OrbitBall:
    """All group elements g with d(g o, o) <= r, each exactly once.

    Modular and Hecke searches use norm monotonicity of their block
    normal forms; Schottky searches prune with the ping-pong half-planes.
    Custom groups fall back to a word-length search (``max_length``) and are
    complete only up to that length.
    """
    if r > r_max:
        raise ConfigError(f"radius {r} above the enumeration limit {r_max}")
    if o is None:
        o = np.array([1.0, 0.0, 0.0])
    o = np.asarray(o, dtype=float)
    if spec.family is Family.MODULAR:
        mats, disp, word = _modular_ball(spec, o, r, budget)
    elif spec.family is Family.HECKE:
        mats, disp, word = _hecke_ball(spec, o, r, budget)
    elif spec.family is Family.SCHOTTKY:
        mats, disp, word = _schottky_ball(spec, o, r, budget)
    else:
        mats, disp, word = _custom_ball(spec, o, r, budget, max_length)
    order = np.lexsort((np.arange(disp.shape[0]), disp))
    disp = disp[order]
    mats = mats[order]

    def sorted_word(i, order=order, word=word):
        return word(int(order[i]))

    return OrbitBall(o, float(r), mats, disp, sorted_word, spec)


# --------------------------------------------------------------------------
# closed geodesics


@dataclass(frozen=True)
class ConjClass:
    key: str
    representative: tuple  # 2x2 matrix
    primitive: bool
    power: int

    def isometry(self) -> Isometry:
        return Isometry.from_sl2(self.representative)


@dataclass(frozen=True)
class ClosedGeodesic:
    cls: ConjClass
    length: float
    axis: tuple  # (repelling, attracting) BoundaryPoints
    trace: Optional[float] = None

    @property
    def key(self) -> str:
        return self.cls.key

    @property
    def primitive(self) -> bool:
        return self.cls.primitive

    @property
    def power(self) -> int:
        return self.cls.power

    @property
    def matrix(self) -> np.ndarray:
        return np.array(self.cls.representative, dtype=float)


def _trace_bound(T: float) -> float:
    return 2.0 * math.cosh(T / 2.0) * (1 + 1e-12)


def _modular_census(T: float, budget: int, diag: dict):
    """Oriented hyperbolic classes <-> necklaces over {R, L} using both letters."""
    bound = _trace_bound(T)
    out = []
    # iterative prenecklace generation (letters 0 = R, 1 = L), pruned by trace
    R = ((1, 1), (0, 1))
    L = ((1, 0), (1, 1))
    stack = [((), 1, ((1, 0), (0, 1)))]
    visited = 0
    while stack:
        seq, p, m = stack.pop()
        visited += 1
        if visited > budget:
            raise BudgetExceeded("census search passed its budget")
        n = len(seq)
        if n and n % p == 0:
            if 0 in seq and 1 in seq:
                tr = m[0][0] + m[1][1]
                out.append((seq, p, m, tr))
            else:
                diag["parabolic"] = diag.get("parabolic", 0) + 1
        lo = seq[n - p] if n else 0
        for letter in (1, 0):
            # necklaces are least rotations, so only all-L words start with L
            if letter < lo or (n == 0 and letter == 1):
                continue
            new_p = p if (n and letter == lo) else n + 1
            (a, b), (c, d) = m
            if letter == 0:
                nm = ((a, a + b), (c, c + d))
            else:
                nm = ((a + b, b), (c + d, d))
            tr = nm[0][0] + nm[1][1]
            has_l = letter == 1 or 1 in seq
            # an all-R prefix of length k still needs an L: trace >= k + 2
            low = tr if has_l else n + 1 + 2
            if low <= bound:
                stack.append((seq + (letter,), new_p, nm))
    result = []
    for seq, p, m, tr in out:
        word = "".join("SU" if x == 0 else "SV" for x in seq)
        power = len(seq) // p
        length = 2.0 * math.acosh(tr / 2.0)
        cls = ConjClass(word, m, power == 1, power)
        result.append(ClosedGeodesic(cls, length, mobius_fixed_points(m), float(tr)))
    return result


def hecke_block_distance(lam: float, k: int) -> float:
    """Distance between the unit semicircle and its translate by k * lam."""
    n1 = half_plane_normal(-1.0, 1.0)
    n2 = half_plane_normal(k * lam - 1.0, k * lam + 1.0)
    return float(np.arccosh(abs(lorentz_inner(n1, n2))))


def _hecke_census(spec: GroupSpec, T: float, budget: int, diag: dict):
    """Classes <-> cyclic sequences (k_1..k_n), k_i != 0, of blocks S T^k."""
    lam = spec.params["lambda"]
    # length of the class is at least the sum of block distances
    costs = {}
    k = 1
    while True:
        c = hecke_block_distance(lam, k)
        if c > T + 1e-9:
            break
        costs[k] = costs[-k] = c
        k += 1
    alphabet = sorted(costs, key=lambda v: (abs(v), v < 0))
    rank = {v: i for i, v in enumerate(alphabet)}
    cmin = min(costs.values()) if costs else math.inf
    out = []
    stack = [((), 1, 0.0)]
    visited = 0
    while stack:
        seq, p, cost = stack.pop()
        visited += 1
        if visited > budget:
            raise BudgetExceeded("census search passed its budget")
        n = len(seq)
        if n and n % p == 0:
            out.append((seq, p))
        lo = rank[seq[n - p]] if n else 0
        for v in alphabet:
            rv = rank[v]
            if rv < lo:
                continue
            if cost + costs[v] > T + 1e-9:
                continue
            new_p = p if (n and rv == lo) else n + 1
            stack.append((seq + (v,), new_p, cost + costs[v]))
    s = spec.matrix("S")
    bound = _trace_bound(T)
    result = []
    for seq, p in out:
        m = np.eye(2)
        for v in seq:
            m = m @ s @ np.array([[1.0, v * lam], [0.0, 1.0]])
        tr = abs(m[0, 0] + m[1, 1])
        if tr <= 2.0 + 1e-9:
            diag["non_loxodromic"] = diag.get("non_loxodromic", 0) + 1
            continue
        if tr > bound:
            continue
        word = "".join("S" + ("T" * v if v > 0 else "t" * (-v)) for v in seq)
        key = minimal_rotation(word)
        power = len(seq) // p
        rep = tuple(tuple(float(x) for x in row) for row in m)
        cls = ConjClass(key, rep, power == 1, power)
        result.append(ClosedGeodesic(cls, 2.0 * math.acosh(tr / 2.0), mobius_fixed_points(rep), float(tr)))
    return result


def schottky_side_distances(spec: GroupSpec) -> Dict[tuple, float]:
    """Distance between the boundary geodesics of each pair of distinct disks."""
    normals = schottky_disk_normals(spec)
    out = {}
    for x, nx in normals.items():
        for y, ny in normals.items():
            if x != y:
                out[x, y] = float(np.arccosh(abs(lorentz_inner(nx, ny))))
    return out


def schottky_min_gap(spec: GroupSpec) -> float:
    return min(schottky_side_distances(spec).values())


def _schottky_census(spec: GroupSpec, T: float, budget: int, diag: dict):
    """Classes <-> necklaces of cyclically reduced words.

    The axis of x_1...x_n crosses the fundamental domain once per letter,
    from the side of x_i^-1 to the side of x_(i+1), so the sum of those side
    distances bounds the length from below.
    """
    labels = sorted(spec.generators)
    side = schottky_side_distances(spec)
    cost = {(x, y): side[spec.inverses[x], y] for x in labels for y in labels if y != spec.inverses[x]}
    out = []
    stack = [("", 1, 0.0)]
    visited = 0
    limit = T + 1e-9
    while stack:
        w, p, c = stack.pop()
        visited += 1
        if visited > budget:
            raise BudgetExceeded("census search passed its budget")
        n = len(w)
        if n and n % p == 0 and spec.inverses[w[-1]] != w[0]:
            if c + cost[w[-1], w[0]] <= limit:
                out.append((w, p))
        lo = w[n - p] if n else labels[0]
        for x in labels:
            if x < lo or (w and spec.inverses[w[-1]] == x):
                continue
            nc = c + cost[w[-1], x] if w else 0.0
            if nc > limit:
                continue
            stack.append((w + x, p if (n and x == lo) else n + 1, nc))
    bound = _trace_bound(T)
    result = []
    for w, p in out:
        m = np.array(eval_word_2x2(spec, w))
        tr = abs(m[0, 0] + m[1, 1])
        if tr > bound:
            continue
        power = len(w) // p
        rep = tuple(tuple(float(x) for x in row) for row in m)
        cls = ConjClass(w, rep, power == 1, power)
        result.append(ClosedGeodesic(cls, 2.0 * math.acosh(tr / 2.0), mobius_fixed_points(rep), float(tr)))
    diag["visited"] = visited
    return result


def enumerate_closed_geodesics(spec: GroupSpec, T: float, primitive_only: bool = False,
                               budget: int = DEFAULT_BUDGET, T_max: Optional[float] = None,
                               diagnostics: Optional[dict] = None) -> List[ClosedGeodesic]:
    """One entry per loxodromic conjugacy class with length <= T, sorted by (length, key)."""
    limit = T_max if T_max is not None else T_MAX_ENUM[spec.family.value]
    if T > limit:
        raise ConfigError(f"T = {T} above the census limit {limit}")
    diag = diagnostics if diagnostics is not None else {}
    if T <= 0:
        return []
    if spec.family is Family.MODULAR:
        res = _modular_census(T, budget, diag)
    elif spec.family is Family.HECKE:
        res = _hecke_census(spec, T, budget, diag)
    elif spec.family is Family.SCHOTTKY:
        res = _schottky_census(spec, T, budget, diag)
    else:
        raise UnsupportedGroup("closed geodesic census needs a preset family")
    res = [g for g in res if g.length <= T + DEFAULT_TOL.classify]
    if primitive_only:
        res = [g for g in res if g.primitive]
    res.sort(key=lambda g: (g.length, g.key))
    return res


def census_counts(census: Sequence[ClosedGeodesic], Ts: Sequence[float]) -> np.ndarray:
    lengths = np.sort(np.array([g.length for g in census]))
    return np.searchsorted(lengths, np.asarray(Ts, dtype=float) + 1e-12, side="right")


def class_word(g: ClosedGeodesic) -> str:
    return g.key


def classify_word(spec: GroupSpec, w: str) -> Kind:
    return classify(eval_word(spec, w)).kind
