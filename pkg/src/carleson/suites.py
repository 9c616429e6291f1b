"""Verification suites shared by the command line and the acceptance tests.

Each suite returns one row per check: the measured value, its threshold, and
where the threshold comes from (``stated`` for constants read off the
statements, ``derived`` for constants we worked out from the proofs,
``oracle`` for comparisons against an independent computation, ``acceptance``
for externally imposed tolerances).  Rows flagged ``info`` are reported but never
decide the verdict.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import integrate
from scipy.optimize import linprog

from .coeffs import AffinePlane, UndefinedBetaError, alpha_cube, beta_cube, optimal_plane, solve_node_lp, \
    weighted_residual, witness_constant
from .energy import carleson_sweep, domination_constant, jones_exact, verify_dyadic_domination, wolff_exact
from .filters import (EXACT_LIMIT, BunchVerificationError, CubeTable, FilterConfig, d_M_set,
                      densbetadoub_check, pruning_check, select_disjoint, up_dominators, up_filter,
                      verify_down_lemmas, verify_up_lemma)
from .filters import _candidates as _bunch_candidates
from .generators import (cantor_four_corner, cantor_self_similar, lipschitz_graph, phi_symmetric_example,
                         plane_patch, random_cloud)
from .lattice import (DyadicLattice, charged_cubes, cube_mass, default_levels, offset_window,
                      smoothed_cube_mass)
from .measure import DiscreteMeasure, ball_mass, fsum, smoothed_mass
from .sqfn import ConvSpec, conv_bump_compare, overlap_bound, overlap_census, randomized_decomposition_check
from .symmetry import (SymmetryConfig, growth_identity_check, mattila_preiss_residual, moment_vector,
                       symmetry_defect)

__all__ = ["Check", "SuiteResult", "SuiteParams", "SUITES", "BUDGETS", "run_suite", "symmetric_fixture",
           "dbd_counterexample", "pruning_config", "lp_dual_value"]


@dataclass
class Check:
    name: str
    value: float
    threshold: float
    provenance: str
    passed: bool
    vacuous: bool = False
    info: bool = False
    note: str = ""

    @property
    def verdict(self) -> str:
        if self.info:
            return "info"
        if self.vacuous:
            return "vacuous"
        return "pass" if self.passed else "FAIL"


@dataclass
class SuiteParams:
    seed: int = 0
    A: float = 2.0
    eps: float = 0.05
    delta: float | None = None
    M: int = 6
    nodes_per_octave: int = 16
    levels: tuple[int, int] | None = None


@dataclass
class SuiteResult:
    name: str
    checks: list[Check]
    seconds: float
    budget: float
    params: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks if not c.info and not c.vacuous) and self.seconds <= self.budget

    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.info and not c.vacuous and not c.passed]

    def summary(self) -> dict:
        return {"suite": self.name, "passed": self.passed, "seconds": round(self.seconds, 3),
                "budget": self.budget, "params": self.params,
                "checks": [dict(asdict(c), verdict=c.verdict) for c in self.checks]}


def _check(name, value, threshold, provenance, passed, **kw) -> Check:
    return Check(name, float(value), float(threshold), provenance, bool(passed), **kw)


# ---------------------------------------------------------------- fixtures

def _family_fixtures() -> list[DiscreteMeasure]:
    return [
        plane_patch(1, 4.0, 0.05),
        plane_patch(2, 2.0, 0.25),
        lipschitz_graph(1, 0.3, 4.0, 0.05, seed=3),
        lipschitz_graph(2, 0.5, 2.0, 0.25, seed=4),
        cantor_four_corner(3),
        cantor_self_similar(2, 1.0 / 3.0, 3),
        cantor_self_similar(3, 0.3, 2),
        symmetric_fixture(0.2),
    ]


_E = [[0.0, -2.0], [0.0, -1.0], [0.0, 0.0], [0.0, 1.0], [0.0, 2.0]]
_F = [1.0, 2.0, 1.0, 2.0, 1.0]


def symmetric_fixture(step: float, extent: float = 20.0) -> DiscreteMeasure:
    """Five parallel lines with a reflection-symmetric density profile."""
    return phi_symmetric_example(1, _E, _F, extent, step)


def _random_measures(rng, count: int, n_max: int, dims=(2, 3)) -> list[DiscreteMeasure]:
    out = []
    for i in range(count):
        d = int(dims[i % len(dims)])
        n = int(rng.integers(10, n_max + 1))
        s = float(rng.uniform(0.5, d - 0.5))
        out.append(random_cloud(n, d, s, int(rng.integers(2 ** 31)), spread=float(rng.uniform(0.5, 4.0))))
    return out


# ---------------------------------------------------------------- 1 sandwich

def suite_sandwich(p: SuiteParams) -> list[Check]:
    rng = np.random.default_rng(p.seed)
    measures = _random_measures(rng, 20, 200) + _family_fixtures()
    ball_bad = cube_bad = chain_bad = tested = cubes = samples = 0
    for mu in measures:
        lo, hi = mu.points.min(0), mu.points.max(0)
        probes = np.vstack([mu.points[:: max(1, mu.n_atoms // 15)], lo + rng.random((10, mu.dim)) * (hi - lo)])
        radii = np.geomspace(0.5 * mu.min_sep, 2.0 * mu.diam, 7)
        for x in probes:
            for r in radii:
                a, b, c = ball_mass(mu, x, r), smoothed_mass(mu, x, r), ball_mass(mu, x, 2 * r)
                ball_bad += not (a <= b <= c)
                tested += 1
        lat = DyadicLattice(tuple(rng.uniform(-0.5, 0.5, mu.dim)))
        k0, k1 = default_levels(mu)
        mid = (k0 + k1) // 2
        for k in (mid, mid - 1):
            qs = charged_cubes(mu, lat, k, k)
            for q in qs[:: max(1, len(qs) // 6)]:
                cubes += 1
                ell, dd = q.side, mu.dim
                in_q = cube_mass(mu, q)
                smooth = smoothed_cube_mass(mu, q)
                in_ball = ball_mass(mu, q.center, q.ball_radius)
                box = np.all(np.abs(mu.points - q.center) < 4.0 * math.sqrt(dd) * ell, axis=1)
                in_box = fsum(mu.weights[box])
                cube_bad += not (in_q <= smooth <= in_ball <= in_box)
                # chain of inclusions on 10^4 samples
                triple = q.center + (rng.random((3000, dd)) - 0.5) * 3 * ell
                u = rng.normal(size=(4000, dd))
                u /= np.linalg.norm(u, axis=1)[:, None]
                inner = q.center + u * (q.plateau_radius * rng.random(4000) ** (1 / dd))[:, None]
                outer = q.center + u[:3000] * (q.ball_radius * (1 + 2 * rng.random(3000)))[:, None]
                d_tr = np.linalg.norm(triple - q.center, axis=1)
                d_out = np.linalg.norm(outer - q.center, axis=1)
                chain_bad += int(np.sum(d_tr > q.plateau_radius))
                chain_bad += int(np.sum(q.weight(triple) != 1.0))
                chain_bad += int(np.sum(q.weight(inner)[np.linalg.norm(inner - q.center, axis=1)
                                                        <= q.plateau_radius] != 1.0))
                chain_bad += int(np.sum(q.weight(outer)[d_out >= q.ball_radius] != 0.0))
                samples += 10000
    return [
        _check("ball_sandwich_violations", ball_bad, 0, "stated", ball_bad == 0, note=f"{tested} (x, r) pairs"),
        _check("cube_density_sandwich_violations", cube_bad, 0, "stated", cube_bad == 0, note=f"{cubes} cubes"),
        _check("chain_of_inclusions_violations", chain_bad, 0, "stated", chain_bad == 0, note=f"{samples} samples"),
    ]


# ---------------------------------------------------------------- 2 eigen plane

def _random_plane(rng, base, n: int, d: int) -> AffinePlane:
    q, _ = np.linalg.qr(rng.normal(size=(d, d)))
    return AffinePlane(base, q.T[:n])


def suite_eigen_plane(p: SuiteParams) -> list[Check]:
    rng = np.random.default_rng(p.seed + 1)
    worst_gap, worst_centroid = -math.inf, 0.0
    for i in range(50):
        d = int(rng.integers(2, 4))
        n = int(rng.integers(1, d))
        m = int(rng.integers(d + 1, 60))
        pts = rng.normal(size=(m, d)) * rng.uniform(0.1, 3.0, size=d) + rng.normal(size=d) * 5
        w = rng.uniform(0.1, 2.0, size=m)
        plane, res = optimal_plane(pts, w, n)
        centroid = (w[:, None] * pts).sum(0) / w.sum()
        scale = float(np.max(np.linalg.norm(pts - centroid, axis=1)))
        worst_centroid = max(worst_centroid, float(plane.dist(centroid)) / scale)
        best_sampled = math.inf
        for j in range(500):
            base = centroid if j % 2 else centroid + rng.normal(size=d) * scale * 0.1
            if j % 5 == 0:  # small rotations of the optimum
                skew = rng.normal(size=(d, d)) * 1e-3
                rot = np.linalg.qr(np.eye(d) + skew - skew.T)[0]
                cand = AffinePlane(base, plane.basis @ rot.T)
            else:
                cand = _random_plane(rng, base, n, d)
            best_sampled = min(best_sampled, weighted_residual(pts, w, cand))
        worst_gap = max(worst_gap, (res - best_sampled) / max(best_sampled, 1e-300))
    return [
        _check("eigen_minus_sampled_relative", worst_gap, 1e-12, "oracle", worst_gap <= 1e-12,
               note="max over 50 instances of (eigen - best of 500 sampled) / sampled"),
        _check("centroid_distance_over_scale", worst_centroid, 1e-10, "acceptance", worst_centroid <= 1e-10),
    ]


# ---------------------------------------------------------------- 3 beta / alpha

def lp_dual_value(nodes: np.ndarray, coeffs: np.ndarray, caps: np.ndarray) -> float:
    """Transport-form dual: min sum d_ij x_ij + sum cap_i (a_i + b_i) over flows balancing c."""
    m = nodes.shape[0]
    i, j = np.nonzero(~np.eye(m, dtype=bool))
    dist = np.sqrt(((nodes[i] - nodes[j]) ** 2).sum(1))
    k = i.size
    A = np.zeros((m, k + 2 * m))
    A[i, np.arange(k)] += 1.0
    A[j, np.arange(k)] -= 1.0
    A[np.arange(m), k + np.arange(m)] = 1.0
    A[np.arange(m), k + m + np.arange(m)] = -1.0
    cost = np.concatenate([dist, caps, caps])
    res = linprog(cost, A_eq=A, b_eq=coeffs, bounds=(0, None), method="highs-ds")
    if res.status != 0:
        raise RuntimeError(res.message)
    return float(res.fun)


def suite_beta_alpha(p: SuiteParams) -> list[Check]:
    rng = np.random.default_rng(p.seed + 2)
    lat = DyadicLattice.standard(2)
    order_bad = norm_bad = raw_bad = flagged = 0
    worst_norm = 0.0
    for i in range(30):
        m = int(rng.integers(8, 30))
        mu = random_cloud(m, 2, 1.0, int(rng.integers(2 ** 31)), spread=float(rng.uniform(0.3, 1.5)))
        if i % 3 == 0:  # near-flat clouds exercise small beta
            pts = mu.points.copy()
            pts[:, 1] = 0.5 + 0.02 * (pts[:, 1] - 0.5)
            mu = DiscreteMeasure(pts, mu.weights, 1.0)
        level = int(math.floor(math.log2(max(mu.diam, 1e-9)))) - 1
        q = lat.cube_of(mu.points.mean(0), level)
        a = alpha_cube(mu, q)
        b = beta_cube(mu, q, 1)
        cw = witness_constant(2)
        # witness and lower coincide when the best plane is the eigen plane; allow one rounding
        order_bad += not (a.upper >= a.witness >= a.lower * (1 - ROUNDOFF_FLOOR))
        lhs = b.normalizer * b.value ** 2
        worst_norm = max(worst_norm, lhs / (cw * a.upper) if a.upper > 0 else (math.inf if lhs > 0 else 0.0))
        norm_bad += not (lhs <= cw * a.upper)
        raw_bad += not (b.value ** 2 <= cw * a.upper)
        flagged += bool(a.flags)
    lp_err = 0.0
    for i in range(30):
        m = int(rng.integers(2, 13))
        nodes = rng.normal(size=(m, int(rng.integers(1, 4))))
        coeffs = rng.normal(size=m)
        caps = rng.uniform(0.1, 3.0, size=m)
        val, f, _ = solve_node_lp(nodes, coeffs, caps)
        lp_err = max(lp_err, abs(val - lp_dual_value(nodes, coeffs, caps)) / max(1.0, abs(val)))
    return [
        _check("upper_ge_witness_ge_lower_violations", order_bad, 0, "derived", order_bad == 0),
        _check("I_beta2_le_Cw_alpha_upper_violations", norm_bad, 0, "derived", norm_bad == 0,
               note=f"max ratio {worst_norm:.3g}"),
        _check("raw_beta2_le_Cw_alpha_upper_violations", raw_bad, 0, "stated", raw_bad == 0, info=True,
               note="without the I_mu(Q) factor; alpha here is not mass-normalised"),
        _check("lp_vs_dual_oracle_relative", lp_err, 1e-4, "oracle", lp_err <= 1e-4),
        _check("alpha_flags", flagged, 0, "acceptance", True, info=True),
    ]


# ---------------------------------------------------------------- 4 energies

def _quad_energy(mu: DiscreteMeasure, kind: str, r_min: float) -> float:
    """Per-atom adaptive quadrature of the radial integrand, tail beyond 2 diam in closed form."""
    s = mu.s
    top = 2.0 * mu.diam
    total = []
    for a in range(mu.n_atoms):
        dist = np.sqrt(((mu.points - mu.points[a]) ** 2).sum(1))

        def integrand(r):
            inside = dist < r
            m = fsum(mu.weights[inside])
            if kind == "wolff":
                return m * m * r ** (-2 * s - 1)
            if inside.sum() <= int(s):
                return 0.0
            _, res = optimal_plane(mu.points[inside], mu.weights[inside], int(s))
            return res * m * r ** (-2 * s - 3)

        brk = np.unique(dist[(dist > r_min) & (dist < top)])
        edges = np.concatenate([[r_min], brk, [top]])
        piece = 0.0
        for lo, hi in zip(edges[:-1], edges[1:]):
            if hi > lo:
                piece += integrate.quad(integrand, lo, hi, epsabs=0.0, epsrel=1e-11, limit=200)[0]
        m_all = fsum(mu.weights)
        if kind == "wolff":
            piece += m_all ** 2 * top ** (-2 * s) / (2 * s)
        else:
            _, res = optimal_plane(mu.points, mu.weights, int(s))
            piece += res * m_all * top ** (-2 * s - 2) / (2 * s + 2)
        total.append(mu.weights[a] * piece)
    return fsum(total)


def suite_energies(p: SuiteParams) -> list[Check]:
    rng = np.random.default_rng(p.seed + 3)
    fixtures = [random_cloud(int(rng.integers(10, 60)), 2 + i % 2, 1.0, int(rng.integers(2 ** 31)))
                for i in range(6)]
    fixtures += [cantor_four_corner(3), plane_patch(1, 2.0, 0.05), lipschitz_graph(1, 0.5, 2.0, 0.04, seed=1),
                 cantor_self_similar(2, 1.0 / 3.0, 2)]
    worst_w = worst_j = 0.0
    for mu in fixtures:
        r_min = mu.r_min_default
        w = wolff_exact(mu, r_min=r_min).total
        worst_w = max(worst_w, abs(w - _quad_energy(mu, "wolff", r_min)) / w)
        if float(mu.s).is_integer():
            j = jones_exact(mu).total
            ref = _quad_energy(mu, "jones", 0.0)
            worst_j = max(worst_j, abs(j - ref) / max(ref, 1e-300) if ref > 0 else abs(j))
    return [
        _check("wolff_vs_quadrature_relative", worst_w, 1e-5, "acceptance", worst_w <= 1e-5),
        _check("jones_vs_quadrature_relative", worst_j, 1e-5, "acceptance", worst_j <= 1e-5),
    ]


# ---------------------------------------------------------------- 5 dyadic domination

def suite_dyadic_domination(p: SuiteParams) -> list[Check]:
    rng = np.random.default_rng(p.seed + 4)
    rows = {"wolff": [0.0, 0, 0], "jones": [0.0, 0, 0]}
    for i in range(100):
        d = 2 + (i % 4 == 3)
        s = 1.0 if i % 2 == 0 else float(rng.uniform(0.4, d - 0.4))
        mu = random_cloud(int(rng.integers(8, 40)), d, s, int(rng.integers(2 ** 31)),
                          spread=float(rng.uniform(0.5, 3.0)))
        lat = DyadicLattice(tuple(rng.uniform(-0.5, 0.5, d)))
        lo, hi = default_levels(mu)
        kinds = ("wolff", "jones") if s == 1.0 else ("wolff",)
        for kind in kinds:
            rep = verify_dyadic_domination(mu, lat, kind, lo, hi)
            acc = rows[kind]
            acc[0] = max(acc[0], rep.max_ratio / rep.constant)
            acc[1] += rep.violations
            acc[2] += rep.pairs
    out = []
    for kind, (ratio, viol, pairs) in rows.items():
        out.append(_check(f"{kind}_octave_violations", viol, 0, "derived", viol == 0,
                          note=f"{pairs} (atom, octave) pairs; C_dom = {domination_constant(kind, 1.0):.6g} at s = 1"))
        out.append(_check(f"{kind}_max_ratio_over_C_dom", ratio, 1.0, "derived", ratio <= 1.0))
    return out


# ---------------------------------------------------------------- 6 overlap

def suite_overlap(p: SuiteParams) -> list[Check]:
    rng = np.random.default_rng(p.seed + 5)
    out = []
    for d in (2, 3):
        for A in (1.0, 2.0, 4.0):
            lat = DyadicLattice(tuple(rng.uniform(-0.5, 0.5, d)))
            level = int(rng.integers(-3, 3))
            side = math.ldexp(1.0, level)
            corner = np.asarray(lat.origin) - 0.5
            special = corner + side * np.array([[0.0] * d, [0.5] * d, [0.25] * d, [0.5] + [0.0] * (d - 1)])
            probes = np.vstack([special, corner + side * rng.uniform(-5, 5, size=(200, d))])
            seen = overlap_census(lat, level, A, probes)
            # independent scan over a generous index box
            reach = A * 4.0 * math.sqrt(d)
            brute = 0
            for x in probes[:20]:
                home = lat.index_of(x, level)[0]
                r = int(math.ceil(reach)) + 2
                axis = np.arange(-r, r + 1)
                box = np.stack(np.meshgrid(*([axis] * d), indexing="ij"), -1).reshape(-1, d) + home
                cen = corner + side * (box + 0.5)
                brute = max(brute, int((np.linalg.norm(cen - x, axis=1) < reach * side).sum()))
            seen20 = overlap_census(lat, level, A, probes[:20])
            bound = overlap_bound(d, A)
            out.append(_check(f"overlap_d{d}_A{A:g}", seen, bound, "derived", seen <= bound and seen20 == brute,
                              note=f"brute-force scan agrees: {seen20 == brute}"))
    return out


# ---------------------------------------------------------------- 7 sign decomposition

def suite_sign_decomposition(p: SuiteParams) -> list[Check]:
    rng = np.random.default_rng(p.seed + 6)
    worst = 0.0
    for i in range(50):
        d = 2 + i % 2
        mu = random_cloud(int(rng.integers(5, 30)), d, float(rng.uniform(0.5, d - 0.5)), int(rng.integers(2 ** 31)))
        f = rng.uniform(-1, 1, mu.n_atoms)
        worst = max(worst, randomized_decomposition_check(mu, f, 1.0 + rng.random(), 1 + i % 3))
    return [_check("sign_decomposition_defect", worst, 1e-12, "acceptance", worst <= 1e-12)]


# ---------------------------------------------------------------- 8 convolution bound

def suite_conv_bound(p: SuiteParams) -> list[Check]:
    rng = np.random.default_rng(p.seed + 7)
    bad, worst = 0, 0.0
    for i in range(20):
        d = 2
        mu = random_cloud(int(rng.integers(6, 20)), d, float(rng.uniform(0.5, 1.5)), int(rng.integers(2 ** 31)))
        f = rng.uniform(-1, 1, mu.n_atoms)
        if i % 2:
            g = ConvSpec(atoms=tuple((float(rng.uniform(0.5, 2.0)), float(rng.uniform(0.1, 1.0)))
                                     for _ in range(int(rng.integers(1, 4)))))
        else:
            a = float(rng.uniform(0.3, 1.0))
            b = a + float(rng.uniform(0.2, 1.5))
            g = ConvSpec(density=lambda u, a=a, b=b: (u - a) * (b - u), support=(a, b), nodes=16)
        cmp = conv_bump_compare(mu, f, g, nodes_per_octave=p.nodes_per_octave)
        bad += not cmp.holds
        if cmp.factor * cmp.rhs > 0:
            worst = max(worst, cmp.lhs / (cmp.factor * cmp.rhs))
    return [_check("conv_bound_failures", bad, 0, "stated", bad == 0, note=f"max lhs/rhs {worst:.4g}")]


# ---------------------------------------------------------------- 9 symmetry

ROUNDOFF_FLOOR = 1e-12


def _defect_on_nodes(mu: DiscreteMeasure) -> float:
    sel = np.nonzero((np.abs(mu.points[:, 0]) < 3.0) & (np.abs(mu.points[:, 1]) < 1e-9))[0]
    cfg = SymmetryConfig(2, (0.3, 0.5), sample_points=tuple(sel[::3]))
    return symmetry_defect(mu, cfg).value


def _defect_off_nodes(mu: DiscreteMeasure, step: float) -> float:
    vals = []
    for t in (0.3, 0.5):
        for x0 in np.linspace(0.0, step, 7)[1:-1]:
            x = np.array([x0, 0.0])
            vals.append(np.linalg.norm(moment_vector(mu, x, t)) / (t * smoothed_mass(mu, x, t)))
    return max(vals)


def _asymmetric_controls(step: float) -> list[DiscreteMeasure]:
    base = symmetric_fixture(step)
    pts, w = base.points, base.weights.copy()
    lopsided = w * np.where(pts[:, 0] > 0.0, 3.0, 1.0)  # jump across the sampled segment
    tilted = w * (1.0 + 0.04 * pts[:, 0])  # stays positive on the extent-20 fixture
    box = base.metadata["support_box"]
    return [DiscreteMeasure(pts, lopsided, 1.0, {"support_box": box}),
            DiscreteMeasure(pts, tilted, 1.0, {"support_box": box})]


def suite_symmetry(p: SuiteParams) -> list[Check]:
    rng = np.random.default_rng(p.seed + 8)
    growth = 0.0
    for i in range(20):
        d = 2 + i % 2
        mu = random_cloud(int(rng.integers(5, 60)), d, float(rng.uniform(0.5, d - 0.5)), int(rng.integers(2 ** 31)))
        for r in np.geomspace(0.05, 2.0, 5):
            growth = max(growth, growth_identity_check(mu, int(rng.integers(mu.n_atoms)), float(r)))
    coarse_h = 0.1
    coarse = _defect_on_nodes(symmetric_fixture(coarse_h))
    fine = _defect_on_nodes(symmetric_fixture(coarse_h / 2))
    ratio = coarse / fine if fine > 0 else math.inf
    resolved = coarse > ROUNDOFF_FLOOR
    off_c = _defect_off_nodes(symmetric_fixture(coarse_h), coarse_h)
    off_f = _defect_off_nodes(symmetric_fixture(coarse_h / 2), coarse_h / 2)
    controls = [_defect_on_nodes(c) for c in _asymmetric_controls(coarse_h / 2)]
    mp_zero = 0.0
    mp_monotone = True
    mp_rows = []
    for angle in (0.0, 0.7):
        rot = np.array([[math.cos(angle), -math.sin(angle)], [math.sin(angle), math.cos(angle)]])
        line = plane_patch(1, 60.0, 0.05).transformed(rotation=rot)
        o = int(np.argmin(np.linalg.norm(line.points, axis=1)))
        x = int(np.argmin(np.linalg.norm(line.points - line.points[o] - 0.5 * rot[:, 0], axis=1)))
        cfg = SymmetryConfig(2, (1.0,))
        vals = [mattila_preiss_residual(line, o, x, R, cfg).value for R in (1.0, 2.0, 4.0, 8.0)]
        mp_zero = max(mp_zero, mattila_preiss_residual(line, o, o, 1.0, cfg).value)
        mp_monotone &= all(b < a for a, b in zip(vals, vals[1:]))
        mp_rows.append(vals)
    return [
        _check("growth_identity_defect", growth, 1e-12, "acceptance", growth <= 1e-12),
        _check("symmetric_defect_halving_ratio", ratio, 2.0, "acceptance", resolved and 1.5 <= ratio <= 2.5,
               note=(f"coarse {coarse:.3g}, fine {fine:.3g}; " +
                     ("defect below the roundoff floor, ratio unresolved" if not resolved else "resolved"))),
        _check("symmetric_defect_off_node_ratio", off_c / off_f, 2.0, "derived", True, info=True,
               note=f"off-node defect {off_c:.3g} -> {off_f:.3g}"),
        _check("asymmetric_control_over_refined", min(controls) / max(fine, 1e-300), 10.0, "acceptance",
               min(controls) > 10 * fine),
        _check("mp_residual_at_origin", mp_zero, 0.0, "stated", mp_zero == 0.0),
        _check("mp_residual_decreasing_in_R", float(mp_monotone), 1.0, "derived", mp_monotone,
               note="; ".join(",".join(f"{v:.3g}" for v in row) for row in mp_rows)),
    ]


def suite_growth_identity(p: SuiteParams) -> list[Check]:
    rng = np.random.default_rng(p.seed + 9)
    growth = 0.0
    for i in range(30):
        d = 2 + i % 2
        mu = random_cloud(int(rng.integers(5, 80)), d, float(rng.uniform(0.5, d - 0.5)), int(rng.integers(2 ** 31)))
        for r in np.geomspace(0.05, 2.0, 6):
            growth = max(growth, growth_identity_check(mu, int(rng.integers(mu.n_atoms)), float(r)))
    return [_check("growth_identity_defect", growth, 1e-12, "acceptance", growth <= 1e-12)]


# ---------------------------------------------------------------- 10 filters

def dbd_counterexample(gap: float = 6.5, heavy: float = 8.0):
    """A small non-flat cluster on a heavy line: its cube lies in D_up yet the density grows fast."""
    lat = DyadicLattice.standard(2)
    q = lat.cube(-4, (8, 8))
    c, ell = q.center, q.side
    tri = c + 0.5 * ell * np.array([[-0.5, -0.3], [0.5, -0.3], [0.0, 0.5]])
    xs = np.concatenate([np.linspace(-200, -gap, 400), np.linspace(gap, 200, 400)]) * ell
    line = np.stack([c[0] + xs, np.full_like(xs, c[1])], 1)
    step = xs[1] - xs[0]
    w = np.concatenate([np.ones(3), np.full(line.shape[0], heavy * step / ell)])
    return DiscreteMeasure(np.vstack([tri, line]), w, 1.0), lat, q


def _greedy_vs_exact(rng, tables) -> tuple[int, int]:
    compared = worse = 0
    for table, cfg in tables:
        dens = table.density()
        pool = np.arange(len(table.cubes))
        for i in range(len(table.cubes)):
            cand = _bunch_candidates(table, i, pool, cfg.eps, dens)
            if not 0 < cand.size <= EXACT_LIMIT:
                continue
            gains = dens[cand] ** 2 * np.exp2(-2 * cfg.eps * (table.levels[i] - table.levels[cand])) * table.mass[cand]
            conflict = table.conflicts(cand)
            _, g_exact, _ = select_disjoint(gains, conflict, "exact")
            _, g_greedy, _ = select_disjoint(gains, conflict, "greedy")
            compared += 1
            worse += g_greedy > g_exact * (1 + 1e-12)
    for _ in range(200):  # synthetic conflict graphs
        k = int(rng.integers(1, EXACT_LIMIT + 1))
        gains = rng.exponential(size=k)
        conflict = rng.random((k, k)) < rng.uniform(0.05, 0.6)
        conflict = np.triu(conflict, 1)
        conflict = conflict | conflict.T
        _, g_exact, _ = select_disjoint(gains, conflict, "exact")
        _, g_greedy, _ = select_disjoint(gains, conflict, "greedy")
        compared += 1
        worse += g_greedy > g_exact * (1 + 1e-12)
    return compared, worse


def suite_filters(p: SuiteParams) -> list[Check]:
    rng = np.random.default_rng(p.seed + 10)
    lat = DyadicLattice.standard(2)
    cfg = FilterConfig(1.0, eps=p.eps, delta=p.delta, M=p.M)
    levels = p.levels or (-3, 1)
    out = []
    tables = []
    fixtures = [("cantor5", cantor_four_corner(5)), ("graph", lipschitz_graph(1, 0.3, 4.0, 1.0 / 16, seed=0))]
    for name, mu in fixtures:
        G = charged_cubes(mu, lat, *levels)
        try:
            rep = verify_down_lemmas(mu, lat, G, G, cfg)
            reverify = 0
        except BunchVerificationError:
            rep, reverify = None, 1
        out.append(_check(f"{name}_bunch_reverification_failures", reverify, 0, "acceptance", reverify == 0))
        if rep is None:
            continue
        tables.append((rep.down.table, cfg))
        out.append(_check(f"{name}_down_chains_hold", float(rep.chains_hold), 1.0, "derived", rep.chains_hold,
                          note=f"certification {rep.certification}; inner max {rep.inner_max:.4g} "
                               f"<= {rep.inner_bound:.4g}"))
        out.append(_check(f"{name}_down_ratio", rep.ratio_down, 1.0 / rep.inner_bound, "derived",
                          rep.ratio_down >= 1.0 / rep.inner_bound))
        uf = up_filter(mu, lat, cfg, *levels)
        ur = verify_up_lemma(mu, uf, cfg)
        up_ok = ur.per_parent_ok and ur.bracket_ok and ur.top_in_up and ur.ratio >= ur.lower_bound
        out.append(_check(f"{name}_up_lemma_chain", ur.ratio, ur.lower_bound, "derived", up_ok,
                          note=f"worst per-parent ratio {ur.worst_parent_ratio:.4g}"))
        bad = rows = 0
        for q in uf.members[:: max(1, len(uf.members) // 30)]:
            try:
                res = densbetadoub_check(mu, lat, q, cfg, levels[1])
            except UndefinedBetaError:
                continue
            rows += len(res)
            bad += sum(not r.passed for r in res)
        out.append(_check(f"{name}_density_doubling_failures", bad, 0, "derived", bad == 0, note=f"{rows} rows"))
        dm = d_M_set(mu, lat, cfg, *levels)
        out.append(_check(f"{name}_d_M_members", len(dm), len(G), "acceptance", True, info=True))
    compared, worse = _greedy_vs_exact(rng, tables)
    out.append(_check("greedy_exceeds_exact", worse, 0, "oracle", worse == 0, note=f"{compared} instances"))
    mu, lat_c, q = dbd_counterexample()
    certified = not up_dominators(mu, q, cfg, 2)
    res = densbetadoub_check(mu, lat_c, q, cfg, 2)
    stated = sum(not r.right_stated for r in res)
    out.append(_check("stated_density_bound_failures_on_counterexample", stated, 0, "stated", stated == 0,
                      info=True, note=f"cube certified in D_up: {certified}; corrected bound failures "
                                      f"{sum(not r.passed for r in res)}"))
    return out


# ---------------------------------------------------------------- 11 pruning

def pruning_config(rng, d: int, k: int):
    """Near-planar measure around an (d - k)-plane through 0 plus a few outliers; returns (mu, plane, R, beta)."""
    R = 1.0
    beta = float(rng.uniform(0.05, 0.15))
    basis_full = np.linalg.qr(rng.normal(size=(d, d)))[0].T
    plane = AffinePlane(np.zeros(d), basis_full[: d - k])
    normals = basis_full[d - k:]
    m = int(rng.integers(60, 160))
    u = rng.uniform(-6, 6, size=(m, d - k))
    u[:8] = rng.uniform(-0.6, 0.6, size=(8, d - k))  # keep mu(B_R) > 0
    pts = u @ plane.basis + (rng.normal(size=(m, k)) * 0.02 * beta * R) @ normals
    w = np.full(m, 1.0 / m)
    n_out = int(rng.integers(1, 4))
    spots = rng.uniform(-1.5, 1.5, size=(n_out, d - k)) @ plane.basis
    heights = rng.uniform(3.2, 6.0, size=n_out) * beta * R * rng.choice([-1, 1], size=n_out)
    dirs = normals[rng.integers(0, k, size=n_out)]
    out_pts = spots + heights[:, None] * dirs
    mass_R = fsum(w[np.linalg.norm(pts, axis=1) < R])
    budget = 0.5 * beta ** 2 * mass_R
    out_w = budget / n_out / (heights ** 2 / R ** 2)
    mu = DiscreteMeasure(np.vstack([pts, out_pts]), np.concatenate([w, out_w]), float(d - k))
    return mu, plane, R, beta


def suite_pruning(p: SuiteParams) -> list[Check]:
    rng = np.random.default_rng(p.seed + 11)
    checked = bad = lemma_bad = both_false = conditions = 0
    worst = math.inf
    for i in range(50):
        d, k = ((2, 1), (3, 1), (3, 2))[i % 3]
        mu, plane, R, beta = pruning_config(rng, d, k)
        for Delta in (0.01, 1.0, 100.0):
            rep = pruning_check(mu, plane, R, beta, Delta)
            both_false += (rep.branch_field is False) and (rep.branch_strip is False)
        checked += rep.checked_atoms
        bad += rep.pointwise_violations
        lemma_bad += not rep.lemma_holds
        conditions += rep.mass_condition_near and rep.mass_condition_tail
        worst = min(worst, rep.min_pointwise_ratio)
    return [
        _check("pointwise_violations", bad, 0, "derived", bad == 0,
               note=f"{checked} (atom, t) pairs; min ratio to |z|/8: {worst:.4g}"),
        _check("pointwise_pairs_checked", checked, 1, "acceptance", checked > 0),
        _check("lemma_violations", lemma_bad, 0, "derived", lemma_bad == 0),
        _check("alternative_both_false", both_false, 0, "derived", both_false == 0),
        _check("configs_with_mass_conditions", conditions, 50, "acceptance", True, info=True),
    ]


# ---------------------------------------------------------------- 12 trends

def suite_trends(p: SuiteParams) -> list[Check]:
    lat = DyadicLattice.standard(2)

    def sweep(mu, kind):
        lo, hi = default_levels(mu)
        return carleson_sweep(mu, lat, kind, lo, hi).value

    cantor = [sweep(cantor_four_corner(g), "jones") for g in range(3, 7)]
    inc = np.diff(cantor)
    inc_ok = bool(np.all(inc > 0)) and inc.max() <= 2 * inc.min()
    graph = [sweep(lipschitz_graph(1, 0.3, 4.0, h, seed=0), "jones") for h in (1 / 64, 1 / 128, 1 / 256)]
    g_ratio = max(graph) / min(graph)
    wolff = [sweep(cantor_self_similar(2, 1.0 / 3.0, g), "wolff") for g in range(2, 6)]
    w_ok = all(b > a for a, b in zip(wolff, wolff[1:]))
    fmt = lambda vals: ", ".join(f"{v:.5g}" for v in vals)  # noqa: E731
    return [
        _check("cantor_jones_increment_spread", inc.max() / inc.min() if inc.min() > 0 else math.inf, 2.0,
               "acceptance", inc_ok, note=fmt(cantor)),
        _check("graph_refinement_ratio", g_ratio, 2.0, "acceptance", g_ratio < 2.0, note=fmt(graph)),
        _check("self_similar_wolff_increasing", float(w_ok), 1.0, "acceptance", w_ok, note=fmt(wolff)),
    ]


SUITES = {
    "sandwich": suite_sandwich,
    "eigen_plane": suite_eigen_plane,
    "beta_alpha": suite_beta_alpha,
    "energies": suite_energies,
    "dyadic_domination": suite_dyadic_domination,
    "overlap": suite_overlap,
    "sign_decomposition": suite_sign_decomposition,
    "conv_bound": suite_conv_bound,
    "symmetry": suite_symmetry,
    "growth_identity": suite_growth_identity,
    "filters": suite_filters,
    "pruning": suite_pruning,
    "trends": suite_trends,
}

BUDGETS = {
    "sandwich": 10.0, "eigen_plane": 30.0, "beta_alpha": 120.0, "energies": 120.0, "dyadic_domination": 60.0,
    "overlap": 10.0, "sign_decomposition": 10.0, "conv_bound": 30.0, "symmetry": 120.0,
    "growth_identity": 10.0, "filters": 180.0, "pruning": 60.0, "trends": 300.0,
}


def run_suite(name: str, params: SuiteParams | None = None) -> SuiteResult:
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; expected one of {sorted(SUITES)}")
    params = params or SuiteParams()
    t0 = time.perf_counter()
    checks = SUITES[name](params)
    elapsed = time.perf_counter() - t0
    return SuiteResult(name, checks, elapsed, BUDGETS[name], asdict(params))
