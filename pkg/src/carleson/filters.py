"""Domination filters, the low-dimensional density set, and the pruning lemma.

Ball tests between lattice cubes are exact: cube centres are held as integers
in units of half the finest side in play, so every containment or
disjointness test is an integer comparison.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .coeffs import AffinePlane, UndefinedBetaError, beta_cube
from .lattice import (DyadicCube, DyadicLattice, ball_containments, charged_cubes, cube_ratio, density,
                      smoothed_cube_mass, triples_disjoint)
from .measure import DiscreteMeasure, fsum, phi
from .sqfn import log_nodes

__all__ = [
    "FilterConfig", "DominationBunch", "BunchVerificationError", "CubeTable", "select_disjoint",
    "find_bunch_below", "DownFilter", "g_down", "splice", "inner_sum", "inner_sum_bound",
    "DownLemmaReport", "verify_down_lemmas", "d_M_set", "upsilon", "UpFilter", "up_filter", "up_dominators",
    "UpLemmaReport", "verify_up_lemma", "DensBetaRow", "densbetadoub_check", "prune_constant",
    "PruningRefused", "PruningReport", "pruning_check", "squash", "EXACT_LIMIT",
]

EXACT_LIMIT = 24  # branch-and-bound up to this many candidates


class BunchVerificationError(AssertionError):
    """A returned bunch failed independent re-verification."""


@dataclass(frozen=True)
class FilterConfig:
    s: float
    eps: float = 0.05
    delta: float | None = None
    M: int = 6
    n: int | None = None
    upsilon: str | None = None

    def __post_init__(self):
        n = math.ceil(self.s) - 1 if self.n is None else int(self.n)
        delta = 0.4 * (self.s - n - self.eps) if self.delta is None else float(self.delta)
        ups = self.upsilon
        if ups is None:
            ups = "beta_times_density" if float(self.s).is_integer() else "density"
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "upsilon", ups)
        if not 0 < self.eps < 1 or not 0 < delta < 1:
            raise ValueError("eps and delta must lie in (0, 1)")
        if self.M < 1:
            raise ValueError("M must be a positive integer")
        if not n + 2 * delta + self.eps < self.s:
            raise ValueError(f"need n + 2 delta + eps < s, got {n + 2 * delta + self.eps} >= {self.s}")
        if not self.s + 2 * self.eps < math.floor(self.s) + 1:
            raise ValueError("need s + 2 eps < floor(s) + 1")
        if ups not in ("beta_times_density", "density"):
            raise ValueError(f"unknown upsilon {ups!r}")
        if ups == "beta_times_density" and not float(self.s).is_integer():
            raise ValueError("beta-weighted upsilon needs integer s")

    def to_dict(self) -> dict:
        return {"s": self.s, "eps": self.eps, "delta": self.delta, "M": self.M, "n": self.n,
                "upsilon": self.upsilon}


# ---------------------------------------------------------------- exact cube geometry

class CubeTable:
    """Cubes of one lattice with integer centres, sides and cached masses."""

    def __init__(self, mu: DiscreteMeasure, cubes, masses=None):
        self.mu = mu
        self.cubes = list(cubes)
        if not self.cubes:
            raise ValueError("empty cube set")
        origins = {q.origin for q in self.cubes}
        if len(origins) != 1:
            raise ValueError("cubes from different lattices")
        self.pos = {q: i for i, q in enumerate(self.cubes)}
        self.levels = np.array([q.level for q in self.cubes], dtype=np.int64)
        self.base = int(self.levels.min())
        shift = self.levels - self.base
        if shift.max() > 40:
            raise OverflowError("level span too wide for integer geometry")
        idx = np.array([q.index for q in self.cubes], dtype=object)
        # centre / 2^{base-1} = 2^{k-base} (2m + 1); side / 2^{base-1} = 2^{k-base+1}
        scale = np.array([1 << int(v) for v in shift], dtype=object)
        self.centres = (2 * idx + 1) * scale[:, None]
        self.sides = 2 * scale
        big = max(int(np.abs(self.centres).max()), int(self.sides.max()))
        if big < 2 ** 28:
            self.centres = self.centres.astype(np.int64)
            self.sides = self.sides.astype(np.int64)
        if masses is None:
            masses = [smoothed_cube_mass(mu, q) for q in self.cubes]
        self.mass = np.asarray(masses, dtype=float)
        self.side_len = np.ldexp(1.0, self.levels)

    def density(self, exponent: float | None = None) -> np.ndarray:
        e = self.mu.s if exponent is None else exponent
        return self.mass / self.side_len ** e

    def _gap2(self, i, js) -> np.ndarray:
        diff = self.centres[js] - self.centres[i]
        return (diff * diff).sum(axis=1)

    def inside(self, inner, c_inner: int | Fraction, outer, c_outer: int | Fraction) -> np.ndarray:
        """B(x_a, c_in sqrt(d) l_a) within B(x_b, c_out sqrt(d) l_b), elementwise over index arrays."""
        inner, outer = np.atleast_1d(inner), np.atleast_1d(outer)
        c_in, c_out = Fraction(c_inner), Fraction(c_outer)
        den = c_in.denominator * c_out.denominator
        a, b = int(c_in * den), int(c_out * den)
        gap = b * self.sides[outer] - a * self.sides[inner]
        diff = self.centres[inner] - self.centres[outer]
        lhs = (diff * diff).sum(axis=1) * den * den
        d = self.mu.dim
        return (gap >= 0) & (lhs <= d * gap * gap)

    def conflicts(self, idx) -> np.ndarray:
        """Square matrix: 3B of idx[a] meets 3B of idx[b] (diagonal False)."""
        c = self.centres[idx]
        sides = self.sides[idx]
        gap2 = 0
        for j in range(c.shape[1]):
            diff = c[:, j, None] - c[None, :, j]
            gap2 = gap2 + diff * diff
        reach = 12 * (sides[:, None] + sides[None, :])
        out = gap2 < self.mu.dim * reach * reach
        np.fill_diagonal(out, False)
        return out

    def triples_apart(self, a, b) -> np.ndarray:
        a, b = np.atleast_1d(a), np.atleast_1d(b)
        reach = 12 * (self.sides[a] + self.sides[b])
        diff = self.centres[a] - self.centres[b]
        return (diff * diff).sum(axis=1) >= self.mu.dim * reach * reach


def _d2i(dens: np.ndarray, mass: np.ndarray) -> np.ndarray:
    return dens * dens * mass


# ---------------------------------------------------------------- disjoint selection

def _exact_select(gains: np.ndarray, conflict: np.ndarray) -> tuple[list[int], float]:
    order = np.argsort(-gains, kind="stable")
    g = gains[order]
    k = len(order)
    masks = [0] * k
    for a in range(k):
        for b in range(k):
            if a != b and conflict[order[a], order[b]]:
                masks[a] |= 1 << b
    suffix = np.concatenate([np.cumsum(g[::-1])[::-1], [0.0]])
    best = [0.0, 0]

    def walk(pos: int, chosen: int, blocked: int, total: float):
        if total > best[0]:
            best[0], best[1] = total, chosen
        if pos == k or total + suffix[pos] <= best[0]:
            return
        if not blocked >> pos & 1:
            walk(pos + 1, chosen | 1 << pos, blocked | masks[pos], total + g[pos])
        walk(pos + 1, chosen, blocked, total)

    walk(0, 0, 0, 0.0)
    picked = sorted(int(order[j]) for j in range(k) if best[1] >> j & 1)
    return picked, fsum(gains[picked]) if picked else 0.0


def _greedy_select(gains: np.ndarray, conflict: np.ndarray) -> tuple[list[int], float]:
    deg = conflict.sum(axis=1)
    order = sorted(range(len(gains)), key=lambda i: (-gains[i] / (1.0 + deg[i]), i))

    def fill(chosen: np.ndarray) -> np.ndarray:
        blocked = conflict[chosen].any(axis=0)
        for i in order:
            if not chosen[i] and not blocked[i]:
                chosen[i] = True
                blocked |= conflict[i]
        return chosen

    chosen = fill(np.zeros(len(gains), dtype=bool))
    improved = True
    while improved:
        improved = False
        for v in order:
            if chosen[v]:
                continue
            clash = np.nonzero(conflict[v] & chosen)[0]
            if clash.size <= 2 and gains[v] > fsum(gains[clash]):
                chosen[clash] = False
                chosen[v] = True
                chosen = fill(chosen)
                improved = True
                break
    picked = np.nonzero(chosen)[0].tolist()
    return picked, fsum(gains[picked]) if picked else 0.0


def select_disjoint(gains, conflict, method: str = "auto") -> tuple[list[int], float, bool]:
    """Max-weight independent set; returns (indices, gain, exact)."""
    gains = np.asarray(gains, dtype=float)
    conflict = np.asarray(conflict, dtype=bool)
    if gains.size == 0:
        return [], 0.0, True
    if method == "exact" or (method == "auto" and gains.size <= EXACT_LIMIT):
        picked, total = _exact_select(gains, conflict)
        return picked, total, True
    picked, total = _greedy_select(gains, conflict)
    return picked, total, False


# ---------------------------------------------------------------- domination from below

@dataclass
class DominationBunch:
    parent: DyadicCube
    cubes: list[DyadicCube]
    gain: float
    target: float
    exact: bool = True

    def verify(self, mu: DiscreteMeasure, eps: float) -> None:
        """Re-check the four defining conditions from scratch."""
        verify_bunch(mu, self.parent, self.cubes, eps)


def _bunch_terms(mu: DiscreteMeasure, q: DyadicCube, members, eps: float) -> tuple[float, float, list[float]]:
    d_q = density(mu, q)
    target = d_q * d_q * smoothed_cube_mass(mu, q)
    terms = []
    for p in members:
        d_p = density(mu, p)
        terms.append(d_p * d_p * 2.0 ** (-2.0 * eps * cube_ratio(q, p)) * smoothed_cube_mass(mu, p))
    return target, fsum(terms) if terms else 0.0, terms


def verify_bunch(mu: DiscreteMeasure, q: DyadicCube, members, eps: float) -> None:
    members = list(members)
    if not members or members == [q]:
        raise BunchVerificationError("empty or trivial bunch")
    d_q = density(mu, q)
    for p in members:
        if p.level >= q.level:
            raise BunchVerificationError(f"{p.label()} is not finer than {q.label()}")
        if not density(mu, p) > 2.0 ** (eps * cube_ratio(q, p)) * d_q:
            raise BunchVerificationError(f"density growth fails for {p.label()}")
        if not ball_containments(p, q, "triple_in_triple"):
            raise BunchVerificationError(f"3B of {p.label()} not inside 3B of {q.label()}")
    for i, a in enumerate(members):
        for b in members[i + 1:]:
            if not triples_disjoint(a, b):
                raise BunchVerificationError(f"triples of {a.label()} and {b.label()} meet")
    target, gain, _ = _bunch_terms(mu, q, members, eps)
    if not gain > target:
        raise BunchVerificationError(f"gain {gain} does not exceed {target}")


def _candidates(table: CubeTable, i: int, pool: np.ndarray, eps: float, dens: np.ndarray) -> np.ndarray:
    lv = table.levels
    pool = pool[lv[pool] < lv[i]]
    if pool.size == 0:
        return pool
    m = (lv[i] - lv[pool]).astype(float)
    grow = dens[pool] > np.exp2(eps * m) * dens[i]
    pool = pool[grow]
    if pool.size == 0:
        return pool
    return pool[table.inside(pool, 12, np.full(pool.size, i), 12)]


def find_bunch_below(mu: DiscreteMeasure, lat: DyadicLattice, q: DyadicCube, candidates, cfg: FilterConfig,
                     table: CubeTable | None = None, method: str = "auto") -> DominationBunch | None:
    """Best bunch dominating q from below among ``candidates``, or None."""
    cands = [c for c in candidates if c != q]
    if not cands:
        return None
    if table is None:
        table = CubeTable(mu, [q] + cands)
    for c in [q] + cands:
        if c not in table.pos:
            raise KeyError(f"cube {c.label()} missing from the table")
    return _find_bunch(table, table.pos[q], np.array([table.pos[c] for c in cands], dtype=np.int64),
                       cfg, method)


def _find_bunch(table: CubeTable, i: int, pool: np.ndarray, cfg: FilterConfig, method: str = "auto",
                sup_density: float | None = None):
    dens = table.density()
    if dens[i] <= 0:
        return None
    cand = _candidates(table, i, pool, cfg.eps, dens)
    if cand.size == 0:
        return None
    sup_d = float(dens[pool].max()) if sup_density is None else sup_density
    window = math.log2(sup_d / dens[i]) / cfg.eps
    gaps = table.levels[i] - table.levels[cand]
    assert gaps.max() <= window * (1 + 1e-12) + 1e-12, "candidate outside the finiteness window"
    m = gaps.astype(float)
    gains = dens[cand] ** 2 * np.exp2(-2.0 * cfg.eps * m) * table.mass[cand]
    conflict = table.conflicts(cand)
    picked, gain, exact = select_disjoint(gains, conflict, method)
    target = dens[i] ** 2 * table.mass[i]
    if not gain > target:
        return None
    q = table.cubes[i]
    members = [table.cubes[int(cand[j])] for j in picked]
    bunch = DominationBunch(q, members, gain, float(target), exact)
    verify_bunch(table.mu, q, members, cfg.eps)
    return bunch


@dataclass
class DownFilter:
    """Cubes of G that no bunch from G' dominates, with the bunches found for the rest."""
    members: list[DyadicCube]
    bunches: dict
    exact: dict
    table: CubeTable = field(repr=False)

    def __contains__(self, q) -> bool:
        return q in self._set

    def __iter__(self):
        return iter(self.members)

    def __len__(self) -> int:
        return len(self.members)

    @property
    def _set(self) -> set:
        return set(self.members)

    @property
    def certification(self) -> str:
        return "exact" if all(self.exact.values()) else "heuristic"


def g_down(mu: DiscreteMeasure, lat: DyadicLattice, G, G_prime, cfg: FilterConfig,
           table: CubeTable | None = None) -> DownFilter:
    G = list(G)
    G_prime = list(G_prime)
    if table is None:
        table = CubeTable(mu, sorted(set(G) | set(G_prime)))
    pool = np.array([table.pos[c] for c in G_prime], dtype=np.int64)
    sup_d = float(table.density()[pool].max()) if pool.size else 0.0
    members, bunches, exact = [], {}, {}
    for q in G:
        i = table.pos[q]
        others = pool[pool != i]
        b = _find_bunch(table, i, others, cfg, sup_density=sup_d) if others.size else None
        if b is None:
            members.append(q)
            cand = _candidates(table, i, others, cfg.eps, table.density()) if others.size else others
            exact[q] = cand.size <= EXACT_LIMIT
        else:
            bunches[q] = b
            exact[q] = b.exact
    return DownFilter(members, bunches, exact, table)


def splice(q: DyadicCube, down: DownFilter) -> list[DyadicCube]:
    """Replace dominated members recursively until every member is undominated."""
    if q in down:
        return [q]
    out = []
    for p in down.bunches[q].cubes:
        out.extend(splice(p, down))
    return out


# ---------------------------------------------------------------- inner sums

def inner_sum(p: DyadicCube, eps: float, level_max: int) -> tuple[float, list[int]]:
    """sum over lattice cubes Q at levels p.level..level_max with 3B_Q containing 3B_p of 2^{-2 eps [Q:p]}.

    Enumerated exactly: in units of l(p)/2 the centre of p is 2m+1 and a cube
    m levels up has centre 2^m (2m' + 1); containment is |delta|^2 <= d (24 (2^m - 1))^2.
    """
    d = p.dim
    cp = np.array([2 * i + 1 for i in p.index], dtype=object)
    counts = []
    for m in range(0, level_max - p.level + 1):
        scale = 1 << m
        reach = 24 * (scale - 1)
        centre = [Fraction(int(c), 2 * scale) - Fraction(1, 2) for c in cp]  # p's centre in index units
        span = math.ceil(reach * math.sqrt(d) / (2 * scale)) + 1  # per-axis reach is sqrt(d) times the radius
        axes = [np.arange(math.floor(c - span), math.ceil(c + span) + 1) for c in centre]
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d).astype(object)
        diff = (2 * mesh + 1) * scale - cp
        ok = (diff * diff).sum(axis=1) <= d * reach * reach
        counts.append(int(np.count_nonzero(ok)))
    total = fsum([c * 2.0 ** (-2.0 * eps * m) for m, c in enumerate(counts)])
    return total, counts


def inner_sum_bound(d: int, eps: float) -> float:
    """Pinned C/eps: at most (24 sqrt(d) + 1)^d cubes per level, times sum_m 2^{-2 eps m}."""
    per_level = (24.0 * math.sqrt(d) + 1.0) ** d
    return per_level * (1.0 / (2.0 * eps * math.log(2.0)) + 1.0)


@dataclass
class DownLemmaReport:
    total_G: float
    total_down: float
    chain_spliced: float
    chain_majorant: float
    total_not_down_prime: float
    stupid_bunch_sum: float
    stupid_majorant: float
    total_G_prime: float
    inner_max: float
    inner_bound: float
    ratio_down: float
    ratio_stupid: float
    chains_hold: bool
    vacuous: bool
    certification: str
    down: DownFilter = field(repr=False)
    down_prime: DownFilter = field(repr=False)


def verify_down_lemmas(mu: DiscreteMeasure, lat: DyadicLattice, G, G_prime, cfg: FilterConfig) -> DownLemmaReport:
    """Both summation lemmas with the proof's explicit majorant chains."""
    G, G_prime = list(G), list(G_prime)
    table = CubeTable(mu, sorted(set(G) | set(G_prime)))
    dens = table.density()
    d2i = _d2i(dens, table.mass)
    lmax = int(table.levels.max())

    def w(q):
        return float(d2i[table.pos[q]])

    inner_cache: dict = {}

    def inner(q):
        if q not in inner_cache:
            inner_cache[q] = inner_sum(q, cfg.eps, lmax)[0]
        return inner_cache[q]

    down = g_down(mu, lat, G, G, cfg, table)
    spliced_terms = []
    for q in G:
        if q in down:
            spliced_terms.append(w(q))
            continue
        members = splice(q, down)
        verify_bunch(mu, q, members, cfg.eps)
        spliced_terms.append(_bunch_terms(mu, q, members, cfg.eps)[1])
    total_G = fsum([w(q) for q in G])
    total_down = fsum([w(q) for q in down.members])
    chain_spliced = fsum(spliced_terms)
    chain_majorant = fsum([w(p) * inner(p) for p in down.members])

    down_p = down if set(G_prime) == set(G) else g_down(mu, lat, G, G_prime, cfg, table)
    not_down = [q for q in G if q not in down_p]
    stupid_lhs = fsum([w(q) for q in not_down])
    stupid_bunch = fsum([down_p.bunches[q].gain for q in not_down])
    stupid_major = fsum([w(p) * inner(p) for p in G_prime])
    total_prime = fsum([w(q) for q in G_prime])

    inner_max = max(inner_cache.values(), default=0.0)
    bound = inner_sum_bound(mu.dim, cfg.eps)
    slack = 1e-12
    ok = (total_G <= chain_spliced * (1 + slack)
          and chain_spliced <= chain_majorant * (1 + slack)
          and stupid_lhs <= stupid_bunch * (1 + slack)
          and stupid_bunch <= stupid_major * (1 + slack)
          and inner_max <= bound)
    vacuous = total_G == 0
    ratio_down = total_down / total_G if total_G > 0 else 1.0
    ratio_stupid = stupid_lhs / total_prime if total_prime > 0 else 0.0
    cert = "exact" if down.certification == down_p.certification == "exact" else "heuristic"
    return DownLemmaReport(total_G, total_down, chain_spliced, chain_majorant, stupid_lhs, stupid_bunch,
                           stupid_major, total_prime, inner_max, bound, ratio_down, ratio_stupid, ok,
                           vacuous, cert, down, down_p)


# ---------------------------------------------------------------- low-dimensional density set

def _coarser_containing(table: CubeTable, i: int, c_in, c_out, max_gap: int | None = None) -> np.ndarray:
    lv = table.levels
    gap = lv - lv[i]
    mask = gap >= 1
    if max_gap is not None:
        mask &= gap <= max_gap
    pool = np.nonzero(mask)[0]
    if pool.size == 0:
        return pool
    return pool[table.inside(np.full(pool.size, i), c_in, pool, c_out)]


def d_M_set(mu: DiscreteMeasure, lat: DyadicLattice, cfg: FilterConfig, level_min: int, level_max: int,
            cubes=None) -> list[DyadicCube]:
    """Cubes whose (n + delta)-density no qualifying ancestor exceeds."""
    cubes = charged_cubes(mu, lat, level_min, level_max) if cubes is None else list(cubes)
    table = CubeTable(mu, cubes)
    dens = table.density(cfg.n + cfg.delta)
    out = []
    for i, q in enumerate(table.cubes):
        big = _coarser_containing(table, i, 4, 4, cfg.M)
        if not np.any(dens[big] > dens[i]):
            out.append(q)
    return out


# ---------------------------------------------------------------- domination from above

def upsilon(mu: DiscreteMeasure, q: DyadicCube, cfg: FilterConfig, mass: float | None = None) -> float:
    dens = (smoothed_cube_mass(mu, q) if mass is None else mass) / q.side ** mu.s
    if cfg.upsilon == "density":
        return dens
    try:
        return beta_cube(mu, q, int(mu.s)).value * dens
    except UndefinedBetaError:
        return 0.0


@dataclass
class UpFilter:
    members: list[DyadicCube]
    values: dict
    dominators: dict
    table: CubeTable = field(repr=False)

    def __contains__(self, q) -> bool:
        return q in set(self.members)

    def __iter__(self):
        return iter(self.members)

    def __len__(self) -> int:
        return len(self.members)


def up_filter(mu: DiscreteMeasure, lat: DyadicLattice, cfg: FilterConfig, level_min: int, level_max: int,
              cubes=None) -> UpFilter:
    """D_up: cubes with no coarser Q' in range, 1/2 B_Q' containing B_Q, and Upsilon(Q') > 2^{eps[Q':Q]} Upsilon(Q)."""
    cubes = charged_cubes(mu, lat, level_min, level_max) if cubes is None else list(cubes)
    table = CubeTable(mu, cubes)
    ups = np.array([upsilon(mu, q, cfg, table.mass[i]) for i, q in enumerate(table.cubes)])
    members, dominators = [], {}
    for i, q in enumerate(table.cubes):
        big = _coarser_containing(table, i, 4, 2)
        gap = (table.levels[big] - table.levels[i]).astype(float)
        dom = big[ups[big] > np.exp2(cfg.eps * gap) * ups[i]]
        if dom.size == 0:
            members.append(q)
        else:
            dominators[q] = [table.cubes[j] for j in dom]
    values = {q: float(ups[i]) for i, q in enumerate(table.cubes)}
    return UpFilter(members, values, dominators, table)


def up_dominators(mu: DiscreteMeasure, q: DyadicCube, cfg: FilterConfig, level_max: int) -> list[DyadicCube]:
    """Lattice cubes up to level_max that dominate q from above; empty iff q is in D_up."""
    u_q = upsilon(mu, q, cfg)
    out = []
    for k in range(q.level + 1, level_max + 1):
        for anc in _ancestors_by_half_ball(q, k):
            if upsilon(mu, anc, cfg) > 2.0 ** (cfg.eps * (k - q.level)) * u_q:
                out.append(anc)
    return out


@dataclass
class UpLemmaReport:
    total_D: float
    total_up: float
    ratio: float
    lower_bound: float
    per_parent_ok: bool
    bracket_ok: bool
    top_in_up: bool
    overlap_constant: float
    worst_parent_ratio: float
    vacuous: bool


def verify_up_lemma(mu: DiscreteMeasure, uf: UpFilter, cfg: FilterConfig) -> UpLemmaReport:
    """Sum over D_up of Upsilon^2 I against the sum over D, through the proof's majorant."""
    table = uf.table
    ups = np.array([uf.values[q] for q in table.cubes])
    w = ups * ups * table.mass
    total_D = fsum(w)
    total_up = fsum([w[table.pos[q]] for q in uf.members])
    top_ok = True
    charged: dict = {}
    for q, doms in uf.dominators.items():
        top = max(doms, key=lambda c: (c.level, c.index))
        top_ok &= top in uf
        charged.setdefault(top, []).append(q)
    const = (8.0 * math.sqrt(mu.dim) + 2.0) ** mu.dim
    per_ok, bracket_ok, worst = True, True, 0.0
    for p, qs in charged.items():
        j = table.pos[p]
        lhs = fsum([w[table.pos[q]] for q in qs])
        rhs_terms = []
        small = np.nonzero(table.levels < table.levels[j])[0]
        inside = small[table.inside(small, 4, np.full(small.size, j), 2)] if small.size else small
        for m in sorted(set((table.levels[j] - table.levels[inside]).tolist())):
            sel = inside[table.levels[j] - table.levels[inside] == m]
            bracket = fsum(table.mass[sel])
            bracket_ok &= bool(bracket <= const * table.mass[j] * (1 + 1e-12))
            rhs_terms.append(2.0 ** (-2.0 * cfg.eps * m) * ups[j] ** 2 * bracket)
        rhs = fsum(rhs_terms) if rhs_terms else 0.0
        per_ok &= lhs <= rhs * (1 + 1e-12)
        if rhs > 0:
            worst = max(worst, lhs / rhs)
    lower = 1.0 / (1.0 + const / (2.0 ** (2.0 * cfg.eps) - 1.0))
    ratio = total_up / total_D if total_D > 0 else 1.0
    return UpLemmaReport(total_D, total_up, ratio, lower, per_ok, bracket_ok, top_ok, const, worst,
                         total_D == 0)


@dataclass
class DensBetaRow:
    ancestor: DyadicCube
    gap: int
    mass_monotone: bool
    left: bool
    right_stated: bool
    right_corrected: bool
    beta_bound: bool | None
    density_bound: bool | None
    ratio: float

    @property
    def passed(self) -> bool:
        """All inequalities that follow from membership in D_up; the stated right bound is reported only."""
        return (self.mass_monotone and self.left and self.right_corrected
                and self.beta_bound is not False and self.density_bound is not False)


def densbetadoub_check(mu: DiscreteMeasure, lat: DyadicLattice, q: DyadicCube, cfg: FilterConfig,
                       level_max: int, slack: float = 1e-12) -> list[DensBetaRow]:
    """Density and beta comparisons between q in D_up and every Q' with 1/2 B_Q' containing B_q.

    ``right_stated`` tests D' <= (l'/l)^{s + 2 eps} D.  The bound that actually
    follows from the residual monotonicity l'^2 I' beta'^2 >= l^2 I beta^2 has
    exponent s + 2 + 2 eps and is the one counted in ``passed``.
    """
    s = mu.s
    i_q = smoothed_cube_mass(mu, q)
    d_q = i_q / q.side ** s
    beta_q = None
    if cfg.upsilon == "beta_times_density":
        beta_q = beta_cube(mu, q, int(s)).value
    rows = []
    for k in range(q.level, level_max + 1):
        m = k - q.level
        for anc in _ancestors_by_half_ball(q, k):
            i_a = smoothed_cube_mass(mu, anc)
            d_a = i_a / anc.side ** s
            r = 2.0 ** m
            up = 1 + slack
            mono = i_a >= i_q * (1 - slack)
            left = r ** -s * d_q <= d_a * up
            stated = d_a <= r ** (s + 2 * cfg.eps) * d_q * up
            corrected = d_a <= r ** (s + 2 + 2 * cfg.eps) * d_q * up
            bb = db = None
            if beta_q is not None and beta_q > 0:
                bb = beta_cube(mu, anc, int(s)).value <= r ** (s + cfg.eps) * beta_q * up
            if cfg.upsilon == "density":
                db = d_a <= r ** cfg.eps * d_q * up
            rows.append(DensBetaRow(anc, m, mono, left, stated, corrected, bb, db, d_a / d_q))
    return rows


def _ancestors_by_half_ball(q: DyadicCube, level: int) -> list[DyadicCube]:
    """Lattice cubes at ``level`` whose half ball contains B_q (q itself at its own level)."""
    if level == q.level:
        return [q]
    m = level - q.level
    scale = 1 << m
    d = q.dim
    cq = [2 * i + 1 for i in q.index]  # units of l(q)/2
    reach2 = 4 * scale - 8  # (2 l' - 4 l) in units of l/2 is 4*2^m - 8
    if reach2 < 0:
        return []
    axes = []
    for c in cq:
        centre = Fraction(c, 2 * scale) - Fraction(1, 2)
        span = math.ceil(reach2 * math.sqrt(d) / (2 * scale)) + 1
        axes.append(range(math.floor(centre - span), math.ceil(centre + span) + 1))
    out = []
    for idx in np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d):
        diff = [(2 * int(j) + 1) * scale - c for j, c in zip(idx, cq)]
        if sum(x * x for x in diff) <= d * reach2 * reach2:
            out.append(DyadicCube(level, tuple(int(j) for j in idx), q.origin))
    return out


# ---------------------------------------------------------------- pruning

def prune_constant(s: float) -> float:
    """C with LHS <= C * RHS: the field component is at least |z|/8 mu(B_R) / (4R)^{s+1} on (3R, 4R)."""
    return 64.0 * 4.0 ** (2.0 * s + 2.0) / math.log(4.0 / 3.0)


class PruningRefused(ValueError):
    def __init__(self, value: float, beta: float):
        super().__init__(f"hypothesis fails: measured {value:.6g} > beta^2 = {beta * beta:.6g}")
        self.value = value


@dataclass
class PruningReport:
    hypothesis: float
    mass_R: float
    lhs: float
    rhs: float
    constant: float
    lemma_holds: bool
    checked_atoms: int
    pointwise_violations: int
    min_pointwise_ratio: float
    mass_condition_near: bool
    mass_condition_tail: bool
    branch_field: bool | None
    branch_strip: bool | None
    corollary_constant: float
    hyperplanes: list = field(default_factory=list)


def _hyperplanes(plane: AffinePlane) -> list[AffinePlane]:
    if plane.dim == plane.ambient - 1:
        return [plane]
    normals = plane.normal_basis()
    keep = [np.vstack([plane.basis, np.delete(normals, j, axis=0)]) for j in range(normals.shape[0])]
    return [AffinePlane(plane.base, b) for b in keep]


def _signed(plane: AffinePlane, x: np.ndarray) -> np.ndarray:
    return (x - plane.base) @ plane.normal_basis()[0]


def pruning_check(mu: DiscreteMeasure, plane: AffinePlane, R: float, beta: float, Delta: float | None = None,
                  origin=None, nodes_per_octave: int = 64) -> PruningReport:
    """Pruning lemma for a hyperplane, and the alternative for an s-plane via its normal hyperplanes."""
    if R <= 0 or beta <= 0:
        raise ValueError("need R > 0 and beta > 0")
    o = np.zeros(mu.dim) if origin is None else np.asarray(origin, dtype=float)
    r = np.sqrt(((mu.points - o) ** 2).sum(1))
    w = mu.weights
    mass_R = fsum(w[r < R])
    if mass_R <= 0:
        raise ValueError("mu(B(0, R)) = 0")
    dist = plane.dist(mu.points)
    hyp = fsum(w[r < 10 * R] * (dist[r < 10 * R] / R) ** 2) / mass_R
    if hyp > beta * beta:
        raise PruningRefused(hyp, beta)
    s = mu.s
    k = plane.ambient - plane.dim
    ts, h = log_nodes(3 * R, 4 * R, nodes_per_octave)
    near2 = r < 2 * R
    idx = np.nonzero(near2)[0]
    # |field|^2 integrated in dt/t over (3R, 4R) at every atom of B(0, 2R)
    diff = mu.points[idx][:, None, :] - mu.points[None, :, :]
    dd = np.sqrt((diff ** 2).sum(-1))
    sq = np.zeros(idx.size)
    for t in ts:
        vec = ((w * phi(dd / t))[:, :, None] * diff).sum(1) / t ** (s + 1)
        sq += (vec ** 2).sum(1) * h
    rhs = fsum(w[idx] * sq)
    checked, bad, worst = 0, 0, math.inf
    cond_near = cond_tail = True
    lhs_total = 0.0
    for H in _hyperplanes(plane):
        z = _signed(H, mu.points)
        e = H.normal_basis()[0]
        outside = idx[np.abs(z[idx]) > 3 * beta * R]
        lhs_total += fsum(w[outside] * (z[outside] / R) ** 2)
        inR = r < R
        tail = (r < 10 * R) & (np.abs(z) > 3 * beta * R)
        tail_ok = fsum(w[tail] * np.abs(z[tail])) / R <= beta * mass_R / 3 * (1 + 1e-12)
        cond_tail &= tail_ok
        for sign in (1.0, -1.0):
            near_ok = fsum(w[inR & (sign * z >= 2 * beta * R)]) <= mass_R / 4 * (1 + 1e-12)
            cond_near &= near_ok
            if not (near_ok and tail_ok):
                continue  # the pointwise bound is only claimed under both mass conditions
            for a in outside[sign * z[outside] > 0]:
                dx = mu.points[a] - mu.points
                dn = np.sqrt((dx ** 2).sum(1))
                for t in ts:
                    comp = abs(fsum(w * phi(dn / t) * (dx @ e)))
                    ratio = comp / (abs(z[a]) * mass_R / 8)
                    worst = min(worst, ratio)
                    checked += 1
                    if ratio < 1 - 1e-12:
                        bad += 1
    C = prune_constant(s)
    lemma_scale = (mass_R / R ** s) ** 2
    if k == 1:
        lhs = lemma_scale * lhs_total
        holds = lhs <= C * rhs * (1 + 1e-12)
    else:
        strip = np.abs(dist) > 3 * beta * k * R
        sel = near2 & strip
        lhs = lemma_scale * fsum(w[sel] * (dist[sel] / R) ** 2)
        holds = lhs <= k ** 3 * C * rhs * (1 + 1e-12)
    c_cor = k ** 3 * C
    b1 = b2 = None
    if Delta is not None:
        b1 = rhs >= Delta * beta ** 2 * lemma_scale * mass_R
        sel = near2 & (np.abs(dist) > 3 * beta * k * R)
        b2 = fsum(w[sel] * (dist[sel] / R) ** 2) <= c_cor * Delta * beta ** 2 * mass_R * (1 + 1e-12)
    return PruningReport(hyp, mass_R, lhs, rhs, C, holds, checked, bad,
                         worst if checked else math.inf, cond_near, cond_tail, b1, b2, c_cor,
                         _hyperplanes(plane))


# ---------------------------------------------------------------- squash

def squash(mu: DiscreteMeasure, plane: AffinePlane, beta: float) -> DiscreteMeasure:
    """Atoms in plane coordinates (normal part / beta, tangential part); weights unchanged."""
    if not beta > 0:
        raise ValueError("beta must be positive")
    rel = mu.points - plane.base
    normal = rel @ plane.normal_basis().T / beta
    along = rel @ plane.basis.T
    meta = dict(mu.metadata)
    meta.pop("support_box", None)
    meta["squash_beta"] = float(beta)
    return DiscreteMeasure(np.hstack([normal, along]), mu.weights.copy(), mu.s, meta)
