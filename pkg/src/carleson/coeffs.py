"""Flatness (beta) and transportation (alpha) coefficients.

beta is a weighted total-least-squares residual, solved by an eigendecomposition
of the weighted covariance about the centroid.  alpha is bounded above by an
exact linear program over a finite node set (atoms plus plane quadrature nodes)
and below by the squared-distance witness function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.linalg import expm
from scipy.optimize import linprog
from scipy.spatial import cKDTree

from .lattice import DyadicCube, cube_atoms
from .measure import BUMP, DiscreteMeasure, fsum, phi

__all__ = [
    "UndefinedBetaError",
    "AffinePlane",
    "BetaResult",
    "AlphaResult",
    "weighted_residual",
    "optimal_plane",
    "beta_ball",
    "beta_cube",
    "witness_constant",
    "plane_nodes",
    "vartheta",
    "default_quad_step",
    "solve_node_lp",
    "alpha_cube",
]


class UndefinedBetaError(ValueError):
    """Raised when the normalising mass of a beta coefficient vanishes."""


@dataclass(frozen=True)
class AffinePlane:
    base: np.ndarray
    basis: np.ndarray  # (n, d), orthonormal rows

    def __post_init__(self):
        base = np.asarray(self.base, dtype=float).ravel()
        basis = np.atleast_2d(np.asarray(self.basis, dtype=float))
        if basis.size == 0:
            basis = np.zeros((0, base.size))
        if basis.shape[1] != base.size:
            raise ValueError("basis vectors must live in the ambient space of base")
        gram = basis @ basis.T
        if not np.allclose(gram, np.eye(basis.shape[0]), atol=1e-12):
            raise ValueError("plane basis is not orthonormal")
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "basis", basis)

    @classmethod
    def from_spanning(cls, base, vectors) -> "AffinePlane":
        """Orthonormalise ``vectors`` (rows) by QR."""
        v = np.atleast_2d(np.asarray(vectors, dtype=float))
        q, _ = np.linalg.qr(v.T)
        return cls(base, q.T[: v.shape[0]])

    @property
    def dim(self) -> int:
        return int(self.basis.shape[0])

    @property
    def ambient(self) -> int:
        return int(self.base.size)

    def normal_basis(self) -> np.ndarray:
        """Orthonormal rows spanning the orthogonal complement."""
        d, n = self.ambient, self.dim
        if n == 0:
            return np.eye(d)
        _, _, vt = np.linalg.svd(self.basis, full_matrices=True)
        return vt[n:]

    def project(self, x) -> np.ndarray:
        y = np.asarray(x, dtype=float) - self.base
        return self.base + (y @ self.basis.T) @ self.basis

    def dist(self, x) -> np.ndarray:
        y = np.asarray(x, dtype=float) - self.base
        perp = y - (y @ self.basis.T) @ self.basis
        return np.sqrt((perp ** 2).sum(axis=-1))

    def foot(self, x) -> np.ndarray:
        """Nearest point of the plane to x."""
        return self.project(np.asarray(x, dtype=float))

    def translated(self, shift) -> "AffinePlane":
        return AffinePlane(self.base + np.asarray(shift, dtype=float), self.basis)


@dataclass(frozen=True)
class BetaResult:
    value: float
    plane: AffinePlane
    normalizer: float
    scale: float
    residual: float  # sum of weighted squared distances to plane


@dataclass(frozen=True)
class AlphaResult:
    upper: float
    lower: float
    plane: AffinePlane
    theta: float
    quad_step: float
    quad_error_bound: float
    lp_value: float = 0.0
    witness: float = 0.0
    flags: tuple[str, ...] = field(default_factory=tuple)


def weighted_residual(points: np.ndarray, weights: np.ndarray, plane: AffinePlane) -> float:
    return fsum(weights * plane.dist(points) ** 2)


def optimal_plane(points, weights, n: int) -> tuple[AffinePlane, float]:
    """Weighted least-squares n-plane and its residual.

    The plane passes through the weighted centroid and spans the top-n
    eigenvectors of the weighted covariance.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    w = np.asarray(weights, dtype=float).ravel()
    total = fsum(w)
    if not total > 0:
        raise UndefinedBetaError("total weight must be positive")
    d = pts.shape[1]
    if not 0 <= n < d:
        raise ValueError(f"plane dimension {n} must lie in [0, {d})")
    centroid = (w @ pts) / total
    y = pts - centroid
    cov = (y * w[:, None]).T @ y
    _, vecs = np.linalg.eigh(cov)  # ascending
    basis = vecs[:, d - n:].T[::-1] if n else np.zeros((0, d))
    plane = AffinePlane(centroid, basis)
    return plane, weighted_residual(pts, w, plane)


def _beta(points, weights, n, scale) -> BetaResult:
    plane, res = optimal_plane(points, weights, n)
    norm = fsum(weights)
    value = math.sqrt(max(res, 0.0) / (norm * scale * scale))
    return BetaResult(value, plane, norm, scale, res)


def beta_ball(mu: DiscreteMeasure, x, r: float, n: int, restrict: DyadicCube | None = None) -> BetaResult:
    """beta_mu(B(x, r)) over the open ball, optionally for mu restricted to a cube."""
    if r <= 0:
        raise ValueError("radius must be positive")
    x = np.asarray(x, dtype=float)
    inside = np.sqrt(((mu.points - x) ** 2).sum(axis=1)) < r
    if restrict is not None:
        rel = (mu.points - restrict.corner) / restrict.side
        inside &= np.all((rel >= 0) & (rel < 1), axis=1)
    if not inside.any():
        raise UndefinedBetaError("ball carries no mass; beta is undefined")
    return _beta(mu.points[inside], mu.weights[inside], n, r)


def beta_cube(mu: DiscreteMeasure, q: DyadicCube, n: int | None = None) -> BetaResult:
    """beta_{mu,n}(Q) with weights w_i phi_Q(x_i), normalised by I_mu(Q) and l(Q)."""
    n = int(math.floor(mu.s)) if n is None else int(n)
    idx, vals = cube_atoms(mu, q)
    if idx.size == 0:
        raise UndefinedBetaError("I_mu(Q) = 0; beta is undefined")
    return _beta(mu.points[idx], mu.weights[idx] * vals, n, q.side)


# ---------------------------------------------------------------- alpha

def witness_constant(d: int) -> float:
    """Lipschitz constant (times l(Q)) of (dist(x, L)/l)^2 phi_{3Q}.

    For L meeting B(x_Q, sqrt(d) l) we have dist <= 13 sqrt(d) l on
    supp phi_{3Q} = B(x_Q, 12 sqrt(d) l), and |grad phi_{3Q}| <= |phi'|/(6 sqrt(d) l).
    """
    return math.sqrt(d) * (26.0 + 169.0 * BUMP.deriv_sup / 6.0)


def plane_nodes(plane: AffinePlane, q: DyadicCube, step: float) -> np.ndarray:
    """Grid nodes on L, spacing ``step``, centred at the foot of x_Q, covering L within B_Q."""
    n = plane.dim
    centre = q.center
    foot = plane.foot(centre)
    h2 = float(((foot - centre) ** 2).sum())
    rad2 = q.ball_radius ** 2 - h2
    if rad2 <= 0:
        return np.zeros((0, plane.ambient))
    reach = math.sqrt(rad2)
    m = int(math.ceil(reach / step))
    axis = np.arange(-m, m + 1, dtype=float)
    grid = np.stack(np.meshgrid(*([axis] * n), indexing="ij"), axis=-1).reshape(-1, n) * step
    grid = grid[np.sqrt((grid ** 2).sum(1)) < reach + step * math.sqrt(n)]
    return foot + grid @ plane.basis


def _plane_integral(plane: AffinePlane, q: DyadicCube, step: float) -> tuple[float, np.ndarray, np.ndarray, int]:
    nodes = plane_nodes(plane, q, step)
    vals = q.weight(nodes) if nodes.size else np.zeros(0)
    keep = vals > 0
    cells = int(nodes.shape[0])
    return fsum(vals[keep]) * step ** plane.dim, nodes[keep], vals[keep], cells


def vartheta(mu: DiscreteMeasure, q: DyadicCube, plane: AffinePlane, quad_step: float | None = None) -> float:
    """theta_{mu,L} = I_mu(Q) / I_{H^n|L}(Q), denominator by grid quadrature on L."""
    step = default_quad_step(q, plane.dim) if quad_step is None else quad_step
    denom, _, _, _ = _plane_integral(plane, q, step)
    if denom <= 0:
        raise ZeroDivisionError("plane misses the support of phi_Q")
    idx, vals = cube_atoms(mu, q)
    return fsum(mu.weights[idx] * vals) / denom


def default_quad_step(q: DyadicCube, n: int) -> float:
    # l/64 on lines; planes of dimension >= 2 use l/16 to keep the node count manageable
    return q.side / (64.0 if n <= 1 else 16.0)


def _quad_errors(q: DyadicCube, n: int, step: float, cells: int, theta: float, plane_mass: float,
                 mass: float) -> float:
    """Rigorous bound on the error from replacing H^n|L by the grid sum.

    Each grid cell of side h contributes at most Lip(g) * h^n * E|u - c| <= Lip(g) * h^{n+1} sqrt(n/12)
    for a Lipschitz integrand g (Jensen on the mean distance to the cell centre).  For g = phi_Q f with feasible f: |f| <= 12 sqrt(d),
    Lip(g) <= (6 |phi'| + 1)/l.  The theta denominator itself uses g = phi_Q.
    """
    d = q.dim
    ell = q.side
    per_cell = step * math.sqrt(n / 12.0) * step ** n
    lip_g = (6.0 * BUMP.deriv_sup + 1.0) / ell
    err_obj = theta * lip_g * per_cell * cells
    lip_phi = BUMP.deriv_sup / (2.0 * math.sqrt(d) * ell)
    err_den = lip_phi * per_cell * cells
    if err_den >= plane_mass:
        return math.inf
    # |theta_true - theta| <= I err / (I_H (I_H - err)); times sup |int phi_Q f dH| <= 12 sqrt(d)(I_H + err)
    dtheta = mass * err_den / (plane_mass * (plane_mass - err_den))
    return err_obj + dtheta * 12.0 * math.sqrt(d) * (plane_mass + err_den)


def solve_node_lp(nodes: np.ndarray, coeffs: np.ndarray, caps: np.ndarray, dense_limit: int = 400,
                  knn: int = 16, max_rounds: int = 50, hubs: np.ndarray | None = None) -> tuple[float, np.ndarray, str]:
    """max sum c_i f_i subject to |f_i - f_j| <= |p_i - p_j| and |f_i| <= caps_i.

    Node coordinates are assumed already divided by l(Q).  Dense pair constraints
    below ``dense_limit`` nodes; otherwise a k-nearest-neighbour graph plus
    cutting planes on violated pairs until none remain, which gives the exact optimum.
    ``hubs`` are nodes whose pairs with every other node are seeded up front.
    """
    m = nodes.shape[0]
    if m == 0:
        return 0.0, np.zeros(0), "empty"
    if m == 1:
        f = np.array([caps[0] * np.sign(coeffs[0])])
        return float(coeffs[0] * f[0]), f, "exact"
    if m <= dense_limit:
        i, j = np.triu_indices(m, 1)
        pairs = np.stack([i, j], axis=1)
    else:
        tree = cKDTree(nodes)
        _, nb = tree.query(nodes, k=min(knn + 1, m))
        a = np.repeat(np.arange(m), nb.shape[1] - 1)
        b = nb[:, 1:].ravel()
        pairs = np.unique(np.sort(np.stack([a, b], axis=1), axis=1), axis=0)
        pairs = pairs[pairs[:, 0] != pairs[:, 1]]
        if hubs is not None and len(hubs):
            h = np.unique(np.asarray(hubs, dtype=np.int64))
            hp = np.stack([np.repeat(h, m), np.tile(np.arange(m), h.size)], axis=1)
            hp = np.sort(hp[hp[:, 0] != hp[:, 1]], axis=1)
            pairs = np.unique(np.concatenate([pairs, hp]), axis=0)
    status = "exact"
    for _ in range(max_rounds):
        f, val = _lp(nodes, coeffs, caps, pairs)
        if m <= dense_limit:
            return val, f, status
        viol = _violations(nodes, f)
        if viol.size == 0:
            return val, f, status
        grown = np.unique(np.concatenate([pairs, viol]), axis=0)
        if grown.shape[0] == pairs.shape[0]:  # only solver-tolerance slack on constraints already present
            return val, f, status
        pairs = grown
    return val, f, "cutting_plane_unconverged"


def _lp(nodes, coeffs, caps, pairs):
    k = pairs.shape[0]
    dist = np.sqrt(((nodes[pairs[:, 0]] - nodes[pairs[:, 1]]) ** 2).sum(1))
    rows = np.repeat(np.arange(2 * k), 2)
    cols = np.concatenate([pairs, pairs[:, ::-1]]).ravel()
    data = np.tile([1.0, -1.0], 2 * k)
    A = sparse.csr_matrix((data, (rows, cols)), shape=(2 * k, nodes.shape[0]))
    b = np.concatenate([dist, dist])
    res = linprog(-coeffs, A_ub=A, b_ub=b, bounds=np.stack([-caps, caps], axis=1), method="highs")
    if res.status != 0:
        raise RuntimeError(f"LP failed: {res.message}")
    return res.x, -float(res.fun)


def _violations(nodes, f, tol=1e-6, chunk=512):  # HiGHS feasibility tolerance is 1e-7 per row
    out = []
    m = nodes.shape[0]
    for s in range(0, m, chunk):
        blk = nodes[s:s + chunk]
        d = np.sqrt(((blk[:, None, :] - nodes[None, :, :]) ** 2).sum(-1))
        gap = np.abs(f[s:s + chunk, None] - f[None, :]) - d
        ii, jj = np.nonzero(gap > tol)
        ii = ii + s
        keep = ii < jj
        if keep.any():
            out.append(np.stack([ii[keep], jj[keep]], axis=1))
    return np.concatenate(out) if out else np.zeros((0, 2), dtype=np.int64)


@dataclass
class _Candidate:
    plane: AffinePlane
    lp_value: float
    theta: float
    err: float
    status: str


def _alpha_for_plane(mu, q, idx, vals, plane, step) -> _Candidate:
    ell = q.side
    mass = fsum(mu.weights[idx] * vals)
    plane_mass, pnodes, pvals, cells = _plane_integral(plane, q, step)
    if plane_mass <= 0:
        return _Candidate(plane, math.inf, math.inf, math.inf, "plane_misses_support")
    theta = mass / plane_mass
    pts = np.concatenate([mu.points[idx], pnodes])
    c = np.concatenate([mu.weights[idx] * vals, -theta * step ** plane.dim * pvals])
    y = (pts - q.center) / ell
    y, inv = np.unique(y, axis=0, return_inverse=True)
    c = np.bincount(inv.ravel(), weights=c, minlength=y.shape[0])
    caps = 12.0 * math.sqrt(q.dim) - np.sqrt((y ** 2).sum(1))
    # atoms sit off the grid, so seed all their pairs; grid pairs are left to k-NN and cutting planes
    val, _, status = solve_node_lp(y, c, caps, hubs=inv.ravel()[: idx.size])
    err = _quad_errors(q, plane.dim, step, cells, theta, plane_mass, mass)
    return _Candidate(plane, val, theta, err, status)


def _admissible(plane: AffinePlane, q: DyadicCube) -> AffinePlane:
    """Shift the plane along its normal so it meets the open quarter ball."""
    centre = q.center
    foot = plane.foot(centre)
    gap = foot - centre
    dist = float(np.sqrt((gap ** 2).sum()))
    limit = 0.999 * math.sqrt(q.dim) * q.side
    if dist < limit:
        return plane
    return plane.translated(-gap * (1.0 - limit / dist))


def alpha_cube(mu: DiscreteMeasure, q: DyadicCube, n: int | None = None, quad_step: float | None = None,
               plane_candidates: list[AffinePlane] | None = None, refine_iters: int = 0,
               seed: int = 0) -> AlphaResult:
    """Certified interval [lower, upper] for alpha_{mu,n}(Q)."""
    n = int(math.floor(mu.s)) if n is None else int(n)
    idx, vals = cube_atoms(mu, q)
    if idx.size == 0:
        raise UndefinedBetaError("I_mu(Q) = 0; alpha is undefined")
    step = default_quad_step(q, n) if quad_step is None else float(quad_step)
    beta = _beta(mu.points[idx], mu.weights[idx] * vals, n, q.side)
    seeds = [_admissible(beta.plane, q), AffinePlane(q.center, beta.plane.basis)]
    seeds += [_admissible(p, q) for p in (plane_candidates or [])]
    cands = [_alpha_for_plane(mu, q, idx, vals, p, step) for p in seeds]
    flags = []
    best = min(cands, key=lambda c: c.lp_value + c.err)
    rng = np.random.default_rng(seed)
    radius = 0.25 * math.sqrt(q.dim) * q.side
    for it in range(refine_iters):
        scale = 0.5 ** (it // 4)
        skew = rng.normal(size=(q.dim, q.dim)) * 0.1 * scale
        rot = expm(skew - skew.T)
        shift = rng.normal(size=q.dim) * radius * scale
        trial = _admissible(AffinePlane(best.plane.base + shift, best.plane.basis @ rot.T), q)
        c = _alpha_for_plane(mu, q, idx, vals, trial, step)
        if c.lp_value + c.err < best.lp_value + best.err:
            best = c
    if refine_iters and best is cands[0]:
        flags.append("plane_search_no_improvement")
    if best.status != "exact":
        flags.append(best.status)
    upper = best.lp_value + best.err
    cw = witness_constant(q.dim)
    # valid for every admissible plane, hence for the infimum
    lower = beta.normalizer * beta.value ** 2 / cw
    witness = weighted_residual(mu.points[idx], mu.weights[idx] * vals, best.plane) / (q.side ** 2 * cw)
    if lower > upper:
        flags.append("lower_exceeds_upper")
    return AlphaResult(upper, lower, best.plane, best.theta, step, best.err, best.lp_value, witness,
                       tuple(flags))

