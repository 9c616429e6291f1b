"""Dyadic lattices, cubes, their balls and bump weights.

A cube at level ``k`` with index ``m`` is ``corner + 2^k [m, m + 1)`` where
``corner = origin - 1/2``, so the level-0 cube with index 0 is
``origin + [-1/2, 1/2)^d``.  Every point lies in exactly one cube per level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import numpy as np

from .measure import DiscreteMeasure, fsum, phi

__all__ = [
    "BALL_FACTOR",
    "PLATEAU_FACTOR",
    "DyadicCube",
    "DyadicLattice",
    "cube_ratio",
    "default_levels",
    "cube_atoms",
    "smoothed_cube_mass",
    "density",
    "cube_mass",
    "offset_window",
    "charged_cubes_level",
    "charged_cubes",
    "ball_inside",
    "ball_containments",
    "triples_disjoint",
    "boundary_atoms",
    "CubeData",
    "CubeCatalog",
]

BALL_FACTOR = 4.0  # B_Q = B(x_Q, 4 sqrt(d) l(Q))
PLATEAU_FACTOR = 2.0  # phi_Q = phi(|x - x_Q| / (2 sqrt(d) l(Q)))


@dataclass(frozen=True, order=True)
class DyadicCube:
    level: int
    index: tuple[int, ...]
    origin: tuple[float, ...] = field(compare=False)

    def __post_init__(self):
        object.__setattr__(self, "index", tuple(int(i) for i in self.index))
        object.__setattr__(self, "origin", tuple(float(o) for o in self.origin))
        if len(self.index) != len(self.origin):
            raise ValueError("index and origin dimensions differ")

    @property
    def dim(self) -> int:
        return len(self.index)

    @property
    def side(self) -> float:
        return math.ldexp(1.0, self.level)

    @property
    def center(self) -> np.ndarray:
        m = np.asarray(self.index, dtype=float)
        return np.asarray(self.origin) - 0.5 + self.side * (m + 0.5)

    @property
    def corner(self) -> np.ndarray:
        return np.asarray(self.origin) - 0.5 + self.side * np.asarray(self.index, dtype=float)

    @property
    def plateau_radius(self) -> float:
        """Radius 2 sqrt(d) l(Q) on which phi_Q is identically 1."""
        return PLATEAU_FACTOR * math.sqrt(self.dim) * self.side

    @property
    def ball_radius(self) -> float:
        """Radius of B_Q; also the support radius of phi_Q."""
        return BALL_FACTOR * math.sqrt(self.dim) * self.side

    def parent(self) -> "DyadicCube":
        return DyadicCube(self.level + 1, tuple(i >> 1 for i in self.index), self.origin)

    def ancestor(self, levels_up: int) -> "DyadicCube":
        return DyadicCube(self.level + levels_up, tuple(i >> levels_up for i in self.index), self.origin)

    def children(self) -> list["DyadicCube"]:
        base = [2 * i for i in self.index]
        out = []
        for bits in range(2 ** self.dim):
            idx = tuple(b + ((bits >> j) & 1) for j, b in enumerate(base))
            out.append(DyadicCube(self.level - 1, idx, self.origin))
        return out

    def contains_point(self, x) -> bool:
        rel = (np.asarray(x, dtype=float) - self.corner) / self.side
        return bool(np.all((rel >= 0) & (rel < 1)))

    def weight(self, x) -> np.ndarray:
        """phi_Q at one or many points."""
        x = np.asarray(x, dtype=float)
        dist = np.sqrt(((x - self.center) ** 2).sum(axis=-1))
        return phi(dist / self.plateau_radius)

    def dilated(self, factor: int = 2) -> "DyadicCube":
        """The same cube in the lattice dilated by a power of two about the point corner = 0."""
        shift = int(round(math.log2(factor)))
        if 2 ** shift != factor:
            raise ValueError("dilation factor must be a power of two")
        origin = tuple(factor * (o - 0.5) + 0.5 for o in self.origin)
        return DyadicCube(self.level + shift, self.index, origin)

    def label(self) -> str:
        return f"{self.level}:" + ",".join(str(i) for i in self.index)


@dataclass(frozen=True)
class DyadicLattice:
    origin: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "origin", tuple(float(o) for o in self.origin))

    @classmethod
    def standard(cls, dim: int) -> "DyadicLattice":
        return cls((0.0,) * dim)

    @property
    def dim(self) -> int:
        return len(self.origin)

    def cube(self, level: int, index) -> DyadicCube:
        return DyadicCube(level, tuple(index), self.origin)

    def index_of(self, points, level: int) -> np.ndarray:
        p = np.atleast_2d(np.asarray(points, dtype=float))
        rel = (p - (np.asarray(self.origin) - 0.5)) / math.ldexp(1.0, level)
        return np.floor(rel).astype(np.int64)

    def cube_of(self, x, level: int) -> DyadicCube:
        return self.cube(level, self.index_of(x, level)[0])


def cube_ratio(q1: DyadicCube, q2: DyadicCube) -> int:
    """[q1 : q2] = |log2(l(q1) / l(q2))|."""
    return abs(q1.level - q2.level)


def default_levels(mu: DiscreteMeasure) -> tuple[int, int]:
    lo = math.ceil(math.log2(mu.min_sep)) if math.isfinite(mu.min_sep) else 0
    hi = math.ceil(math.log2(mu.diam)) + 1 if mu.diam > 0 else lo
    return lo, max(lo, hi)


def cube_atoms(mu: DiscreteMeasure, q: DyadicCube) -> tuple[np.ndarray, np.ndarray]:
    """Indices (ascending) of atoms where phi_Q > 0, with the phi_Q values."""
    idx = np.asarray(sorted(mu.tree.query_ball_point(q.center, q.ball_radius)), dtype=np.int64)
    if idx.size == 0:
        return idx, np.zeros(0)
    vals = q.weight(mu.points[idx])
    keep = vals > 0
    return idx[keep], vals[keep]


def smoothed_cube_mass(mu: DiscreteMeasure, q: DyadicCube) -> float:
    """I_mu(Q) = sum_i w_i phi_Q(x_i)."""
    idx, vals = cube_atoms(mu, q)
    return fsum(mu.weights[idx] * vals)


def density(mu: DiscreteMeasure, q: DyadicCube, n: float | None = None) -> float:
    """D_{mu,n}(Q) = I_mu(Q) / l(Q)^n, with n = s by default."""
    n = mu.s if n is None else n
    if n <= 0:
        raise ValueError("density exponent must be positive")
    return smoothed_cube_mass(mu, q) / q.side ** n


def cube_mass(mu: DiscreteMeasure, q: DyadicCube) -> float:
    """mu(Q) for the half-open cube."""
    rel = (mu.points - q.corner) / q.side
    inside = np.all((rel >= 0) & (rel < 1), axis=1)
    return fsum(mu.weights[inside])


def _check_levels(level_min: int, level_max: int) -> None:
    if level_min > level_max:
        raise ValueError(f"empty level range {level_min}:{level_max}")


def offset_window(dim: int, radius_in_sides: float) -> np.ndarray:
    """Integer offsets o with |o| < radius + sqrt(d), enough to reach every cube centre within radius."""
    r = int(math.ceil(radius_in_sides)) + 1
    axis = np.arange(-r, r + 1)
    mesh = np.stack(np.meshgrid(*([axis] * dim), indexing="ij"), axis=-1).reshape(-1, dim)
    keep = np.sqrt((mesh.astype(float) ** 2).sum(1)) <= radius_in_sides + math.sqrt(dim)
    return mesh[keep]


def _unique_rows(a: np.ndarray) -> np.ndarray:
    """Lexicographically sorted unique integer rows, via one packed int64 key per row."""
    lo = a.min(axis=0)
    span = a.max(axis=0) - lo + 1
    if float(np.prod(span.astype(float))) >= 2.0 ** 62:
        return np.unique(a, axis=0)
    mult = np.concatenate([np.cumprod(span[::-1])[::-1][1:], [1]])
    keys = np.unique((a - lo) @ mult)
    out = np.empty((keys.size, a.shape[1]), dtype=np.int64)
    for j, m in enumerate(mult):
        out[:, j], keys = np.divmod(keys, m)
    return out + lo


def charged_cubes_level(mu: DiscreteMeasure, lat: DyadicLattice, level: int) -> list[DyadicCube]:
    d = mu.dim
    side = math.ldexp(1.0, level)
    home = _unique_rows(lat.index_of(mu.points, level))
    offsets = offset_window(d, BALL_FACTOR * math.sqrt(d))
    cand = _unique_rows((home[:, None, :] + offsets[None, :, :]).reshape(-1, d))
    centres = np.asarray(lat.origin) - 0.5 + side * (cand + 0.5)
    dist, _ = mu.tree.query(centres, k=1)
    # phi is nonincreasing, so I_mu(Q) > 0 iff phi_Q is positive at the nearest atom
    plateau = PLATEAU_FACTOR * math.sqrt(d) * side
    cand = cand[np.asarray(phi(dist / plateau)) > 0]
    return [DyadicCube(level, tuple(m), lat.origin) for m in cand]


def charged_cubes(mu: DiscreteMeasure, lat: DyadicLattice, level_min: int, level_max: int) -> list[DyadicCube]:
    """All cubes with I_mu(Q) > 0 in the level range, ordered by (level, index)."""
    _check_levels(level_min, level_max)
    if lat.dim != mu.dim:
        raise ValueError("lattice and measure dimensions differ")
    out = []
    for k in range(level_min, level_max + 1):
        out.extend(charged_cubes_level(mu, lat, k))
    return out


def _exact_centre_delta(a: DyadicCube, b: DyadicCube) -> list[Fraction]:
    # corner offsets cancel; centres are 2^k (m + 1/2) relative to the common corner
    fa = [Fraction(2) ** a.level * (Fraction(m) + Fraction(1, 2)) for m in a.index]
    fb = [Fraction(2) ** b.level * (Fraction(m) + Fraction(1, 2)) for m in b.index]
    return [x - y for x, y in zip(fa, fb)]


def ball_inside(inner: DyadicCube, c_inner: Fraction, outer: DyadicCube, c_outer: Fraction) -> bool:
    """Exact test of B(x_in, c_in sqrt(d) l_in) within B(x_out, c_out sqrt(d) l_out)."""
    if inner.origin != outer.origin:
        raise ValueError("cubes from different lattices")
    gap = c_outer * Fraction(2) ** outer.level - c_inner * Fraction(2) ** inner.level
    if gap < 0:
        return False
    delta2 = sum(x * x for x in _exact_centre_delta(inner, outer))
    return delta2 <= inner.dim * gap * gap


def ball_containments(q_small: DyadicCube, q_big: DyadicCube, mode: str) -> bool:
    """Exact ball containment predicates used by the filters.

    * ``half_contains``: half of B_{q_big} contains B_{q_small}
    * ``triple_in_triple``: 3B_{q_small} inside 3B_{q_big}
    * ``contains``: B_{q_big} contains B_{q_small}
    """
    if mode == "half_contains":
        return ball_inside(q_small, Fraction(4), q_big, Fraction(2))
    if mode == "triple_in_triple":
        return ball_inside(q_small, Fraction(12), q_big, Fraction(12))
    if mode == "contains":
        return ball_inside(q_small, Fraction(4), q_big, Fraction(4))
    raise ValueError(f"unknown containment mode {mode!r}")


def triples_disjoint(a: DyadicCube, b: DyadicCube) -> bool:
    """3B_a and 3B_b are disjoint (open balls: touching counts as disjoint)."""
    reach = Fraction(12) * (Fraction(2) ** a.level + Fraction(2) ** b.level)
    delta2 = sum(x * x for x in _exact_centre_delta(a, b))
    return delta2 >= a.dim * reach * reach


def boundary_atoms(mu: DiscreteMeasure, lat: DyadicLattice, level: int, rel_tol: float = 1e-12) -> np.ndarray:
    """Indices of atoms within rel_tol * l of a cube face at this level."""
    rel = (mu.points - (np.asarray(lat.origin) - 0.5)) / math.ldexp(1.0, level)
    frac = rel - np.floor(rel)
    near = np.minimum(frac, 1.0 - frac) <= rel_tol
    return np.nonzero(near.any(axis=1))[0]


@dataclass
class CubeData:
    cube: DyadicCube
    atoms: np.ndarray
    phi_vals: np.ndarray
    mass: float  # I_mu(Q)


class CubeCatalog:
    """Charged cubes over a level range with cached atom lists and smoothed masses."""

    def __init__(self, mu: DiscreteMeasure, lat: DyadicLattice, level_min: int, level_max: int):
        _check_levels(level_min, level_max)
        self.mu, self.lat = mu, lat
        self.level_min, self.level_max = level_min, level_max
        self._data: dict[DyadicCube, CubeData] = {}
        self.cubes = charged_cubes(mu, lat, level_min, level_max)
        self.index = {q: i for i, q in enumerate(self.cubes)}

    def data(self, q: DyadicCube) -> CubeData:
        if q not in self._data:
            idx, vals = cube_atoms(self.mu, q)
            self._data[q] = CubeData(q, idx, vals, fsum(self.mu.weights[idx] * vals))
        return self._data[q]

    def mass(self, q: DyadicCube) -> float:
        return self.data(q).mass

    def density(self, q: DyadicCube, n: float | None = None) -> float:
        n = self.mu.s if n is None else n
        return self.mass(q) / q.side ** n

    def level(self, k: int) -> list[DyadicCube]:
        return [q for q in self.cubes if q.level == k]

    @cached_property
    def sup_density(self) -> float:
        return max((self.density(q) for q in self.cubes), default=0.0)

    def __len__(self) -> int:
        return len(self.cubes)

    def __iter__(self):
        return iter(self.cubes)
