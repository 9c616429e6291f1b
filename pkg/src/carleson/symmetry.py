"""Diagnostics for phi-symmetry: defects, doubling radii and moment identities."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .coeffs import AffinePlane, optimal_plane
from .measure import BUMP, DiscreteMeasure, dphi, fsum, phi, smoothed_mass

__all__ = [
    "EmptyDiagnosticError",
    "SymmetryConfig",
    "moment_vector",
    "interior_distance",
    "DefectReport",
    "symmetry_defect",
    "doubling_scales",
    "is_doubling",
    "MPResidual",
    "mattila_preiss_residual",
    "span_basis",
    "growth_identity_check",
    "NonflatReport",
    "nonflatness_functional",
]


class EmptyDiagnosticError(ValueError):
    """No (point, scale) pair qualified for the diagnostic."""


@dataclass(frozen=True)
class SymmetryConfig:
    dim: int
    scale_grid: tuple[float, ...]
    sample_points: tuple[int, ...] = ()
    tau: float | None = None
    C_tau: float | None = None
    growth_exponent: float | None = None

    def __post_init__(self):
        tau = 1000.0 * math.sqrt(self.dim) if self.tau is None else float(self.tau)
        lam = float(self.dim) if self.growth_exponent is None else float(self.growth_exponent)
        c_tau = 2.0 * tau ** self.dim if self.C_tau is None else float(self.C_tau)
        if not c_tau > tau ** lam:
            raise ValueError(f"C_tau = {c_tau} must exceed tau^lambda = {tau ** lam}")
        if any(r <= 0 for r in self.scale_grid):
            raise ValueError("scale grid must be positive")
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "C_tau", c_tau)
        object.__setattr__(self, "growth_exponent", lam)
        object.__setattr__(self, "scale_grid", tuple(sorted(float(r) for r in self.scale_grid)))

    @staticmethod
    def geometric(dim: int, r0: float, r1: float, count: int, **kw) -> "SymmetryConfig":
        return SymmetryConfig(dim, tuple(np.geomspace(r0, r1, count)), **kw)


def moment_vector(mu: DiscreteMeasure, x, t: float) -> np.ndarray:
    """sum_i w_i (x - x_i) phi(|x - x_i| / t)."""
    x = np.asarray(x, dtype=float)
    diff = x - mu.points
    dist = np.sqrt((diff ** 2).sum(1))
    near = dist < 2.0 * t
    return ((mu.weights[near] * phi(dist[near] / t))[:, None] * diff[near]).sum(axis=0)


def interior_distance(mu: DiscreteMeasure, x) -> float:
    """Distance from x to the faces of the declared support box; inf if none is declared."""
    box = mu.metadata.get("support_box")
    if box is None:
        return math.inf
    lo, hi = np.asarray(box[0], dtype=float), np.asarray(box[1], dtype=float)
    x = np.asarray(x, dtype=float)
    live = hi - lo > 1e-12 * max(1.0, float(np.abs(hi - lo).max()))
    if not live.any():
        return math.inf
    gaps = np.minimum(x - lo, hi - x)[live]
    return float(gaps.min())


@dataclass
class DefectReport:
    value: float
    argmax: tuple[int, float]
    qualified: int
    skipped: int
    rows: list = field(default_factory=list)


def symmetry_defect(mu: DiscreteMeasure, config: SymmetryConfig) -> DefectReport:
    """max over interior (x, t) of |moment(x, t)| / (t I_mu(B(x, t)))."""
    samples = config.sample_points or tuple(range(mu.n_atoms))
    best, arg, used, skipped, rows = -1.0, None, 0, 0, []
    for i in samples:
        x = mu.points[i]
        room = interior_distance(mu, x)
        for t in config.scale_grid:
            if room < 2.0 * t:
                skipped += 1
                rows.append((i, t, math.nan, False))
                continue
            val = float(np.linalg.norm(moment_vector(mu, x, t))) / (t * smoothed_mass(mu, x, t))
            used += 1
            rows.append((i, t, val, True))
            if val > best:
                best, arg = val, (i, t)
    if used == 0:
        raise EmptyDiagnosticError("no sample point is at distance >= 2t from the support boundary")
    return DefectReport(best, arg, used, skipped, rows)


def doubling_scales(mu: DiscreteMeasure, x, config: SymmetryConfig) -> list[float]:
    """Grid radii R with I_mu(B(x, tau R)) <= C_tau I_mu(B(x, R))."""
    out = []
    for R in config.scale_grid:
        if smoothed_mass(mu, x, config.tau * R) <= config.C_tau * smoothed_mass(mu, x, R):
            out.append(R)
    return out


def is_doubling(mu: DiscreteMeasure, x, R: float, config: SymmetryConfig) -> bool:
    return smoothed_mass(mu, x, config.tau * R) <= config.C_tau * smoothed_mass(mu, x, R)


def _mp_vector(y: np.ndarray, w: np.ndarray, x: np.ndarray, r: float) -> np.ndarray:
    norm = np.sqrt((y ** 2).sum(1))
    keep = norm > 0
    y, w, norm = y[keep], w[keep], norm[keep]
    coef = w * dphi(norm / r) * ((y @ x) / norm) / r
    inner = (coef[:, None] * y).sum(axis=0)
    mass = fsum(w * phi(norm / r)) + 0.0
    return x + inner / (mass if mass > 0 else math.inf)


@dataclass
class MPResidual:
    value: float
    comparison: float
    radii: np.ndarray
    residuals: np.ndarray


def mattila_preiss_residual(mu: DiscreteMeasure, origin: int, x: int, R: float, config: SymmetryConfig,
                            r_nodes: int = 33) -> MPResidual:
    """sup over r in [R, 2R] of |x + I(B(0,r))^{-1} sum w (y/r) phi'(|y|/r) <y/|y|, x>|.

    Coordinates are translated so the origin atom sits at 0.  ``comparison`` is
    C_tau |x|^2 / R, the shape of the bound, without its unspecified constant.
    """
    o = mu.points[origin]
    xv = mu.points[x] - o
    if not R > float(np.linalg.norm(xv)):
        raise ValueError("need R > |x - origin|")
    if not is_doubling(mu, o, R, config):
        raise ValueError(f"R = {R} is not a doubling radius at the origin atom")
    y = mu.points - o
    radii = np.linspace(R, 2.0 * R, r_nodes)
    res = np.array([np.linalg.norm(_mp_vector(y, mu.weights, xv, r)) for r in radii])
    return MPResidual(float(res.max()), config.C_tau * float(xv @ xv) / R, radii, res)


def span_basis(vectors: np.ndarray, diam: float) -> np.ndarray:
    """Orthonormal basis (rows) of the span of ``vectors``, rank by singular values."""
    if vectors.size == 0:
        return np.zeros((0, vectors.shape[1] if vectors.ndim == 2 else 0))
    _, sv, vt = np.linalg.svd(vectors, full_matrices=False)
    rank = int((sv > 1e-10 * max(diam, 1e-300) * math.sqrt(vectors.shape[0])).sum())
    return vt[:rank]


def growth_identity_check(mu: DiscreteMeasure, origin: int, r: float) -> float:
    """Max pairwise gap between the three expressions for -r d/dr I_mu(B(0, r))."""
    y = mu.points - mu.points[origin]
    basis = span_basis(y, mu.diam)
    if basis.shape[0] == 0:
        return 0.0
    norm = np.sqrt((y ** 2).sum(1))
    keep = norm > 0
    y, w, norm = y[keep], mu.weights[keep], norm[keep]
    dp = dphi(norm / r)
    proj = y @ basis.T  # <y, v_j>
    e1 = fsum((w * dp / (r * norm))[:, None] * proj * proj)
    e2 = fsum(w * (norm / r) * dp)
    deriv = -fsum(w * (norm / r ** 2) * dp)  # d/dr I_mu(B(0, r))
    e3 = -r * deriv
    return max(abs(e1 - e2), abs(e2 - e3), abs(e1 - e3))


@dataclass
class NonflatReport:
    value: float
    threshold: float
    plane: AffinePlane
    above_threshold: bool


def nonflatness_functional(mu: DiscreteMeasure, origin, R: float, n: int,
                           config: SymmetryConfig | None = None) -> NonflatReport:
    """I(B(0,R))^{-1} inf_L sum w (dist(x, L)/R)^2 phi(|x|/2R)."""
    o = np.asarray(origin, dtype=float) if np.ndim(origin) else mu.points[int(origin)]
    norm = np.sqrt(((mu.points - o) ** 2).sum(1))
    wt = mu.weights * phi(norm / (2.0 * R))
    keep = wt > 0
    if not keep.any():
        raise EmptyDiagnosticError("no mass under the weight phi(|x|/2R)")
    plane, res = optimal_plane(mu.points[keep], wt[keep], n)
    mass = smoothed_mass(mu, o, R)
    if mass <= 0:
        raise EmptyDiagnosticError("I_mu(B(0,R)) = 0")
    value = res / (mass * R * R)
    c_tau = (config.C_tau if config is not None else 2.0 * (1000.0 * math.sqrt(mu.dim)) ** mu.dim)
    thr = 1.0 / (4.0 * c_tau * BUMP.deriv_sup ** 2)
    return NonflatReport(value, thr, plane, value > thr)
