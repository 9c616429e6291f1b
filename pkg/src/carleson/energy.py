"""Wolff and Jones energies in closed form, and their dyadic counterparts.

For an atom x the ball mass m(r) = mu(B(x, r)) and the least-squares residual
S(r) are constant between consecutive distances from x to the other atoms, so
the radial integrals reduce to sums of power-law pieces:

    Wolff:  int_a^b m^2 r^{-2s-1} dr = m^2 (a^{-2s} - b^{-2s}) / (2s)
    Jones:  int_a^b S m r^{-2s-3} dr = S m (a^{-2s-2} - b^{-2s-2}) / (2s+2)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .coeffs import beta_cube
from .lattice import CubeCatalog, DyadicCube, DyadicLattice
from .measure import DiscreteMeasure, fsum

__all__ = [
    "KINDS",
    "EnergyReport",
    "wolff_exact",
    "jones_exact",
    "energy_exact",
    "dyadic_term",
    "DyadicSum",
    "dyadic_energy_sum",
    "domination_constant",
    "DominationReport",
    "verify_dyadic_domination",
    "SweepResult",
    "carleson_sweep",
]

KINDS = ("wolff", "jones")


@dataclass
class EnergyReport:
    kind: str
    total: float
    per_atom: np.ndarray
    r_min: float
    r_max: float
    breakpoint_count: int
    atoms: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    notes: tuple[str, ...] = ()


def _check_kind(kind: str, s: float) -> None:
    if kind not in KINDS:
        raise ValueError(f"unknown energy kind {kind!r}")
    if kind == "jones" and float(s) != int(s):
        raise ValueError("Jones energy needs integer s; use the Wolff energy for non-integer s")


def _residual_sum(cov: np.ndarray, n: int) -> np.ndarray:
    """Sum of the d - n smallest eigenvalues of a stack of symmetric matrices."""
    d = cov.shape[-1]
    if d == 2 and n == 1:
        a, b, c = cov[..., 0, 0], cov[..., 0, 1], cov[..., 1, 1]
        half = 0.5 * (a - c)
        lam = 0.5 * (a + c) - np.sqrt(half * half + b * b)
    else:
        ev = np.linalg.eigvalsh(cov)
        lam = ev[..., : d - n].sum(axis=-1)
    return np.maximum(lam, 0.0)


def _block_profiles(points: np.ndarray, weights: np.ndarray, rows: np.ndarray, kind: str, s: float):
    """Sorted breakpoints and interval coefficients for the atoms in ``rows``.

    Returns (R, C) of shape (B, N): interval j is (R[:, j], R[:, j+1]] with
    R[:, N] = inf, and the integrand there is C[:, j] * r^{-p}.
    """
    x = points[rows]
    diff = points[None, :, :] - x[:, None, :]
    dist = np.sqrt((diff ** 2).sum(-1))
    order = np.argsort(dist, axis=1, kind="stable")
    R = np.take_along_axis(dist, order, axis=1)
    w = weights[order]
    m = np.cumsum(w, axis=1)
    if kind == "wolff":
        return R, m * m
    n = int(s)
    y = np.take_along_axis(diff, order[:, :, None], axis=1)
    M = np.cumsum(w[:, :, None] * y, axis=1)
    T = np.cumsum(w[:, :, None, None] * y[:, :, :, None] * y[:, :, None, :], axis=1)
    cov = T - M[:, :, :, None] * M[:, :, None, :] / m[:, :, None, None]
    S = _residual_sum(cov, n)
    S[:, 0] = 0.0  # a lone atom lies on every plane through it
    return R, S * m


def _exponent(kind: str, s: float) -> float:
    return 2.0 * s if kind == "wolff" else 2.0 * s + 2.0


def _integrate(R: np.ndarray, C: np.ndarray, q: float, lo: float, hi: float) -> np.ndarray:
    """Row sums of int C r^{-q-1} dr over each interval clipped to [lo, hi]."""
    nxt = np.concatenate([R[:, 1:], np.full((R.shape[0], 1), np.inf)], axis=1)
    a = np.clip(R, lo, hi)
    b = np.clip(nxt, lo, hi)
    live = (b > a) & (C > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        piece = np.where(live, C * (a ** -q - b ** -q) / q, 0.0)
    return piece.sum(axis=1)


def _block_size(n: int, d: int) -> int:
    return max(1, int(2 ** 22 // max(1, n * d * d)))


def _energy_arrays(points, weights, s, kind, r_min, r_max):
    q = _exponent(kind, s)
    n_atoms = points.shape[0]
    out = np.zeros(n_atoms)
    step = _block_size(n_atoms, points.shape[1])
    for start in range(0, n_atoms, step):
        rows = np.arange(start, min(n_atoms, start + step))
        R, C = _block_profiles(points, weights, rows, kind, s)
        out[rows] = weights[rows] * _integrate(R, C, q, r_min, r_max)
    return out


def _region(mu: DiscreteMeasure, q: DyadicCube | None) -> np.ndarray:
    if q is None:
        return np.arange(mu.n_atoms)
    rel = (mu.points - q.corner) / q.side
    return np.nonzero(np.all((rel >= 0) & (rel < 1), axis=1))[0]


def _energy(mu, q, r_min, r_max, kind) -> EnergyReport:
    _check_kind(kind, mu.s)
    if r_min is None:
        r_min = mu.r_min_default if kind == "wolff" else 0.0
    if r_max is None:
        r_max = math.inf
    if kind == "wolff" and not r_min > 0:
        raise ValueError("Wolff energy needs r_min > 0 for atomic measures")
    if r_min < 0 or not r_max > r_min:
        raise ValueError("need 0 <= r_min < r_max")
    idx = _region(mu, q)
    notes = ("jones integrand vanishes below the separation scale",) if kind == "jones" else ()
    if idx.size == 0:
        return EnergyReport(kind, 0.0, np.zeros(0), r_min, r_max, 0, idx, notes)
    per = _energy_arrays(mu.points[idx], mu.weights[idx], mu.s, kind, r_min, r_max)
    return EnergyReport(kind, fsum(per), per, r_min, r_max, int(idx.size) ** 2, idx, notes)


def wolff_exact(mu: DiscreteMeasure, q: DyadicCube | None = None, r_min: float | None = None,
                r_max: float | None = None) -> EnergyReport:
    """W(mu|Q, Q) truncated to [r_min, r_max]; q=None means all of R^d."""
    return _energy(mu, q, r_min, r_max, "wolff")


def jones_exact(mu: DiscreteMeasure, q: DyadicCube | None = None, r_min: float | None = 0.0,
                r_max: float | None = None) -> EnergyReport:
    """J(mu|Q, Q) truncated to [r_min, r_max]; q=None means all of R^d."""
    return _energy(mu, q, r_min, r_max, "jones")


def energy_exact(mu, kind, q=None, r_min=None, r_max=None) -> EnergyReport:
    return _energy(mu, q, r_min, r_max, kind)


# ---------------------------------------------------------------- dyadic side

def dyadic_term(cat: CubeCatalog, q: DyadicCube, kind: str) -> float:
    """beta^2 D^2 (Jones) or D^2 (Wolff) for one cube, without the I factor."""
    dens = cat.density(q)
    if kind == "wolff":
        return dens * dens
    beta = beta_cube(cat.mu, q, int(cat.mu.s)).value
    return beta * beta * dens * dens


@dataclass
class DyadicSum:
    kind: str
    total: float
    cubes: list[DyadicCube]
    terms: np.ndarray


def dyadic_energy_sum(mu: DiscreteMeasure, lat: DyadicLattice, kind: str, level_min: int,
                      level_max: int, catalog: CubeCatalog | None = None) -> DyadicSum:
    """sum over charged cubes of beta^2 D^2 I (Jones) or D^2 I (Wolff)."""
    _check_kind(kind, mu.s)
    cat = catalog or CubeCatalog(mu, lat, level_min, level_max)
    cubes = [q for q in cat.cubes if level_min <= q.level <= level_max]
    terms = np.array([dyadic_term(cat, q, kind) * cat.mass(q) for q in cubes])
    return DyadicSum(kind, fsum(terms), cubes, terms)


def domination_constant(kind: str, s: float) -> float:
    """Constant in the pointwise octave bound.

    For r in (2^k, 2^{k+1}] and the cube Q of side 2^{k+1} whose closure holds x,
    B(x, r) sits inside {phi_Q = 1}.  Then mu(B)/r^s <= 2^s D(Q) and the residual
    r^{-s} int_B (dist/r)^2 <= 2^{s+2} beta(Q)^2 D(Q); the octave has dr/r-length ln 2.
    """
    if kind == "wolff":
        return 2.0 ** (2.0 * s) * math.log(2.0)
    return 2.0 ** (2.0 * s + 2.0) * math.log(2.0)


@dataclass
class DominationReport:
    kind: str
    max_ratio: float
    constant: float
    argmax: tuple[int, int]
    violations: int
    pairs: int
    ratios: np.ndarray


def verify_dyadic_domination(mu: DiscreteMeasure, lat: DyadicLattice, kind: str, level_min: int,
                             level_max: int) -> DominationReport:
    """Max over atoms x and octaves (2^k, 2^{k+1}] of octave integral / dyadic majorant.

    The majorant at octave k sums terms * phi_Q(x) over cubes of side 2^{k+1}.
    """
    _check_kind(kind, mu.s)
    cat = CubeCatalog(mu, lat, level_min + 1, level_max + 1)
    q_exp = _exponent(kind, mu.s)
    levels = list(range(level_min, level_max + 1))
    maj = np.zeros((mu.n_atoms, len(levels)))
    for j, k in enumerate(levels):
        for q in cat.level(k + 1):
            data = cat.data(q)
            maj[data.atoms, j] += dyadic_term(cat, q, kind) * data.phi_vals
    octave = np.zeros_like(maj)
    step = _block_size(mu.n_atoms, mu.dim)
    for start in range(0, mu.n_atoms, step):
        rows = np.arange(start, min(mu.n_atoms, start + step))
        R, C = _block_profiles(mu.points, mu.weights, rows, kind, mu.s)
        for j, k in enumerate(levels):
            octave[rows, j] = _integrate(R, C, q_exp, math.ldexp(1.0, k), math.ldexp(1.0, k + 1))
    if np.any((maj == 0) & (octave > 0)):
        raise ArithmeticError("octave integral positive with zero dyadic majorant")
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(maj > 0, octave / maj, 0.0)
    const = domination_constant(kind, mu.s)
    flat = int(np.argmax(ratios))
    i, j = divmod(flat, len(levels))
    return DominationReport(kind, float(ratios.max()), const, (i, levels[j]),
                            int((ratios > const).sum()), int(ratios.size), ratios)


@dataclass
class SweepResult:
    kind: str
    value: float
    argmax: DyadicCube | None
    per_cube: dict


def carleson_sweep(mu: DiscreteMeasure, lat: DyadicLattice, kind: str, level_min: int, level_max: int,
                   r_min: float | None = None, r_max: float | None = None) -> SweepResult:
    """sup over cubes P in range of E(mu|P, P) / mu(P), with E the chosen energy."""
    _check_kind(kind, mu.s)
    if r_min is None:
        r_min = mu.r_min_default if kind == "wolff" else 0.0
    r_max = math.inf if r_max is None else r_max
    cache: dict[bytes, float] = {}
    per_cube = {}
    best, arg = 0.0, None
    for k in range(level_min, level_max + 1):
        home = lat.index_of(mu.points, k)
        keys, inv = np.unique(home, axis=0, return_inverse=True)
        inv = inv.ravel()
        for c, m in enumerate(keys):
            idx = np.nonzero(inv == c)[0]
            key = idx.tobytes()
            if key not in cache:
                pts, w = mu.points[idx], mu.weights[idx]
                e = fsum(_energy_arrays(pts, w, mu.s, kind, r_min, r_max))
                cache[key] = e / fsum(w)
            q = DyadicCube(k, tuple(m), lat.origin)
            per_cube[q] = cache[key]
            if cache[key] > best:
                best, arg = cache[key], q
    return SweepResult(kind, best, arg, per_cube)
