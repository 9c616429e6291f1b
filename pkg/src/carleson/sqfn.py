"""The smoothed first-moment field, square functions and their constituents."""

from __future__ import annotations

import itertools
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .lattice import CubeCatalog, DyadicCube, DyadicLattice, offset_window
from .measure import DiscreteMeasure, fsum, phi

__all__ = [
    "field",
    "SpatialHash",
    "log_nodes",
    "sqfn_apply",
    "ConstituentRecord",
    "constituent",
    "overlap_bound",
    "overlap_census",
    "single_scale_terms",
    "randomized_decomposition_check",
    "ConvSpec",
    "ConvComparison",
    "conv_bump_compare",
    "indicator_norm",
]


def _terms(mu: DiscreteMeasure, x: np.ndarray, t: float, idx: np.ndarray, f=None) -> np.ndarray:
    diff = x - mu.points[idx]
    dist = np.sqrt((diff ** 2).sum(1))
    near = dist < 2.0 * t
    idx, diff, dist = idx[near], diff[near], dist[near]
    w = mu.weights[idx] if f is None else mu.weights[idx] * np.asarray(f)[idx]
    return diff * (w * phi(dist / t) / t ** (mu.s + 1.0))[:, None]


def field(mu: DiscreteMeasure, x, t: float, f=None) -> np.ndarray:
    """sum_i w_i f_i (x - x_i) / t^{s+1} phi(|x - x_i| / t), by direct summation."""
    if t <= 0:
        raise ValueError("scale must be positive")
    x = np.asarray(x, dtype=float)
    return _terms(mu, x, t, np.arange(mu.n_atoms), f).sum(axis=0)


class SpatialHash:
    """Uniform grid of cell side 2t; only the 3^d cells around a query can hold contributors."""

    def __init__(self, mu: DiscreteMeasure, t: float):
        if t <= 0:
            raise ValueError("scale must be positive")
        self.mu, self.t, self.side = mu, t, 2.0 * t
        cells = np.floor(mu.points / self.side).astype(np.int64)
        table = defaultdict(list)
        for i, c in enumerate(map(tuple, cells)):
            table[c].append(i)
        self.table = {k: np.asarray(v, dtype=np.int64) for k, v in table.items()}
        self.offsets = list(itertools.product((-1, 0, 1), repeat=mu.dim))

    def neighbours(self, x) -> np.ndarray:
        home = np.floor(np.asarray(x, dtype=float) / self.side).astype(np.int64)
        found = [self.table.get(tuple(home + np.asarray(o)), None) for o in self.offsets]
        found = [a for a in found if a is not None]
        if not found:
            return np.zeros(0, dtype=np.int64)
        return np.sort(np.concatenate(found))

    def field(self, x, f=None) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return _terms(self.mu, x, self.t, self.neighbours(x), f).sum(axis=0)


def log_nodes(t_min: float, t_max: float, nodes_per_octave: int) -> tuple[np.ndarray, float]:
    """Midpoints of a log-uniform grid on [t_min, t_max] and the common dt/t weight."""
    if not 0 < t_min < t_max:
        raise ValueError("need 0 < t_min < t_max")
    if nodes_per_octave < 4:
        raise ValueError("nodes_per_octave must be at least 4")
    span = math.log(t_max / t_min)
    count = max(1, int(math.ceil(span / math.log(2.0) * nodes_per_octave)))
    h = span / count
    return t_min * np.exp(h * (np.arange(count) + 0.5)), h


class _PairTable:
    """Flat (query, atom) pairs within a fixed reach, for vectorised field evaluation over many t."""

    def __init__(self, mu: DiscreteMeasure, queries: np.ndarray, reach: float, f=None):
        self.mu = mu
        self.nq = queries.shape[0]
        lists = mu.tree.query_ball_point(queries, reach)
        qi = np.repeat(np.arange(self.nq), [len(v) for v in lists])
        aj = np.concatenate([np.sort(np.asarray(v, dtype=np.int64)) for v in lists]) if self.nq else \
            np.zeros(0, dtype=np.int64)
        self.qi, self.aj = qi, aj.astype(np.int64)
        self.diff = queries[qi] - mu.points[self.aj]
        self.dist = np.sqrt((self.diff ** 2).sum(1))
        w = mu.weights[self.aj]
        self.w = w if f is None else w * np.asarray(f, dtype=float)[self.aj]

    def field_sq(self, t: float, profile: Callable = phi) -> np.ndarray:
        coef = self.w * profile(self.dist / t) / t ** (self.mu.s + 1.0)
        out = np.zeros(self.nq)
        for c in range(self.diff.shape[1]):
            comp = np.bincount(self.qi, weights=coef * self.diff[:, c], minlength=self.nq)
            out += comp * comp
        return out


def _sq_integral(table: _PairTable, t_min: float, t_max: float, npo: int, profile=phi) -> np.ndarray:
    ts, h = log_nodes(t_min, t_max, npo)
    acc = np.zeros(table.nq)
    for t in ts:
        acc += table.field_sq(t, profile)
    return acc * h


def sqfn_apply(mu: DiscreteMeasure, f, x, t_min: float, t_max: float,
               nodes_per_octave: int = 16) -> tuple[float, bool]:
    """(int_{t_min}^{t_max} |field_f(x, t)|^2 dt/t)^{1/2} and a convergence flag."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    table = _PairTable(mu, x, 2.0 * t_max, f)
    val = _sq_integral(table, t_min, t_max, nodes_per_octave)[0]
    fine = _sq_integral(table, t_min, t_max, 2 * nodes_per_octave)[0]
    flag = abs(fine - val) > 1e-3 * max(abs(fine), 1e-300)
    return math.sqrt(max(val, 0.0)), bool(flag)


@dataclass(frozen=True)
class ConstituentRecord:
    cube: DyadicCube
    A: float
    value: float
    t_nodes: int
    quad_flag: bool


def constituent(mu: DiscreteMeasure, q: DyadicCube, A: float, nodes_per_octave: int = 16,
                check: bool = True) -> ConstituentRecord:
    """S^A_mu(Q) = sum_{x in A B_Q} w_x int_{l/A}^{A l} |field(x, t)|^2 dt/t."""
    if not A > 1:
        raise ValueError("A must exceed 1")
    centre, radius = q.center, A * q.ball_radius
    dist = np.sqrt(((mu.points - centre) ** 2).sum(1))
    inside = np.nonzero(dist < radius)[0]
    ell = q.side
    if inside.size == 0:
        return ConstituentRecord(q, A, 0.0, 0, False)
    table = _PairTable(mu, mu.points[inside], 2.0 * A * ell)
    vals = _sq_integral(table, ell / A, A * ell, nodes_per_octave)
    value = fsum(mu.weights[inside] * vals)
    flag = False
    if check:
        fine = fsum(mu.weights[inside] * _sq_integral(table, ell / A, A * ell, 2 * nodes_per_octave))
        flag = abs(fine - value) > 1e-3 * max(abs(fine), 1e-300)
    nodes = log_nodes(ell / A, A * ell, nodes_per_octave)[0].size
    return ConstituentRecord(q, A, value, nodes, bool(flag))


def overlap_bound(d: int, A: float) -> float:
    return (8.0 * math.sqrt(d) * A + 2.0) ** d


def overlap_census(lat: DyadicLattice, level: int, A: float, probes) -> int:
    """Max over probes of the number of level-k cubes Q with probe in the open ball A B_Q."""
    if A < 1:
        raise ValueError("A must be at least 1")
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    d = lat.dim
    side = math.ldexp(1.0, level)
    reach = A * 4.0 * math.sqrt(d)
    offsets = offset_window(d, reach)
    best = 0
    for p in probes:
        home = lat.index_of(p, level)[0]
        idx = home + offsets
        centres = np.asarray(lat.origin) - 0.5 + side * (idx + 0.5)
        count = int((np.sqrt(((centres - p) ** 2).sum(1)) < reach * side).sum())
        best = max(best, count)
    return best


def single_scale_terms(mu: DiscreteMeasure, f, t: float, k0: int) -> np.ndarray:
    """Stack over |k| <= k0 of T_k f(x_i) = sum_j w_j f_j (x_i - x_j)/(2^k t)^{s+1} phi(|x_i - x_j|/(2^k t))."""
    diff = mu.points[:, None, :] - mu.points[None, :, :]
    dist = np.sqrt((diff ** 2).sum(-1))
    wf = mu.weights * np.asarray(f, dtype=float)
    out = []
    for k in range(-k0, k0 + 1):
        tk = math.ldexp(t, k)
        ker = phi(dist / tk) / tk ** (mu.s + 1.0) * wf[None, :]
        out.append((ker[:, :, None] * diff).sum(axis=1))
    return np.stack(out)  # (2k0+1, N, d)


def randomized_decomposition_check(mu: DiscreteMeasure, f, t: float, k0: int) -> float:
    """|E_omega ||sum_k eps_k T_k f||^2 - sum_k ||T_k f||^2| by exhaustive sign enumeration."""
    if k0 > 4:
        raise ValueError("k0 > 4 would enumerate more than 2^9 sign patterns")
    if not 1 <= t < 2:
        raise ValueError("t must lie in [1, 2)")
    terms = single_scale_terms(mu, f, t, k0)
    w = mu.weights
    diag = fsum([fsum(w * (tk ** 2).sum(-1)) for tk in terms])
    vals = []
    for signs in itertools.product((-1.0, 1.0), repeat=terms.shape[0]):
        total = np.tensordot(np.asarray(signs), terms, axes=1)
        vals.append(fsum(w * (total ** 2).sum(-1)))
    expect = fsum(vals) / len(vals)
    return abs(expect - diag)


@dataclass(frozen=True)
class ConvSpec:
    """A nonnegative g, either as atoms of g(u) du/u or a density on [a, b]."""

    atoms: tuple[tuple[float, float], ...] = ()
    density: Callable | None = None
    support: tuple[float, float] | None = None
    nodes: int = 32

    def discretise(self) -> tuple[np.ndarray, np.ndarray]:
        if self.density is None:
            u = np.array([a[0] for a in self.atoms], dtype=float)
            c = np.array([a[1] for a in self.atoms], dtype=float)
        else:
            a, b = self.support
            x, wq = np.polynomial.legendre.leggauss(self.nodes)
            u = 0.5 * (b - a) * x + 0.5 * (a + b)
            c = np.array([self.density(v) for v in u]) * 0.5 * (b - a) * wq / u
        if np.any(u <= 0) or np.any(c < 0):
            raise ValueError("g must be nonnegative and supported in (0, inf)")
        return u, c


def _sq_norm(mu, f, profile: Callable, npo: int, t_lo: float, t_hi: float, tail_gain: float) -> float:
    """||S_{mu,profile}(f)||^2, with the t > t_hi tail in closed form (profile = tail_gain there)."""
    table = _PairTable(mu, mu.points, np.inf, f)
    inner = _sq_integral(table, t_lo, t_hi, npo, profile)
    wf = mu.weights * np.asarray(f, dtype=float)
    V = mu.points * fsum(wf) - (wf @ mu.points)  # sum_y w_y f_y (x - y)
    tail = tail_gain ** 2 * (V ** 2).sum(1) * t_hi ** (-2.0 * mu.s - 2.0) / (2.0 * mu.s + 2.0)
    return fsum(mu.weights * (inner + tail))


@dataclass(frozen=True)
class ConvComparison:
    lhs: float
    rhs: float
    factor: float
    tolerance: float
    holds: bool


def conv_bump_compare(mu: DiscreteMeasure, f, g: ConvSpec, psi: Callable = phi,
                      nodes_per_octave: int = 32) -> ConvComparison:
    """Compare ||S_{psi_g} f|| with [int u^{s+1} g du/u] ||S_psi f||.

    psi is assumed to equal 1 on [0, 1] and vanish on [2, inf), like phi.
    """
    u, c = g.discretise()
    factor = fsum(c * u ** (mu.s + 1.0))

    def psi_g(r):
        r = np.asarray(r, dtype=float)
        return sum(cj * psi(r / uj) for uj, cj in zip(u, c))

    if mu.n_atoms == 1 or not np.any(np.asarray(f) != 0):
        return ConvComparison(0.0, 0.0, factor, 0.0, True)
    lo = 0.5 * mu.min_sep / u.max()
    hi = mu.diam / u.min()
    mass = fsum(c)
    vals = []
    for npo in (nodes_per_octave, 2 * nodes_per_octave):
        left = math.sqrt(_sq_norm(mu, f, psi_g, npo, lo, hi, mass))
        right = math.sqrt(_sq_norm(mu, f, psi, npo, 0.5 * mu.min_sep, mu.diam, 1.0))
        vals.append((left, right))
    (l1, r1), (l2, r2) = vals
    tol = abs(l2 - l1) + factor * abs(r2 - r1) + 1e-12 * (l2 + factor * r2)
    return ConvComparison(l2, r2, factor, tol, l2 <= factor * r2 + tol)


def indicator_norm(mu: DiscreteMeasure, P: DyadicCube, lat: DyadicLattice, A: float, level_min: int,
                   level_max: int, nodes_per_octave: int = 16) -> dict[int, float]:
    """Per-level sums of constituents of mu restricted to P, divided by mu(P)."""
    rel = (mu.points - P.corner) / P.side
    inside = np.all((rel >= 0) & (rel < 1), axis=1)
    if not inside.any():
        raise ValueError("mu(P) = 0")
    sub = mu.restrict(inside)
    cat = CubeCatalog(sub, lat, level_min, level_max)
    out = {}
    for k in range(level_min, level_max + 1):
        vals = [constituent(sub, q, A, nodes_per_octave, check=False).value for q in cat.level(k)]
        out[k] = fsum(vals) / sub.total_mass
    return out
