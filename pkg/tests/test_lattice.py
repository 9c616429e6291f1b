import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from carleson.lattice import (CubeCatalog, DyadicCube, DyadicLattice, ball_containments, boundary_atoms,
                              charged_cubes, cube_mass, cube_ratio, default_levels, density, smoothed_cube_mass,
                              triples_disjoint)
from carleson.measure import DiscreteMeasure, ball_mass, smoothed_mass
from conftest import clouds


def brute_charged(mu, lat, k):
    """Scan a bounding index window directly."""
    side = math.ldexp(1.0, k)
    corner = np.asarray(lat.origin) - 0.5
    reach = 4 * math.sqrt(mu.dim) * side
    lo = np.floor((mu.points.min(0) - reach - corner) / side).astype(int) - 1
    hi = np.floor((mu.points.max(0) + reach - corner) / side).astype(int) + 1
    out = []
    for m in itertools.product(*[range(a, b + 1) for a, b in zip(lo, hi)]):
        q = DyadicCube(k, m, lat.origin)
        if np.sum(mu.weights * q.weight(mu.points)) > 0:
            out.append(q)
    return sorted(out)


def test_cube_ratio():
    lat = DyadicLattice.standard(2)
    a, b = lat.cube(5, (0, 0)), lat.cube(2, (3, 1))
    assert cube_ratio(a, a) == 0
    assert cube_ratio(a, b) == 3 == cube_ratio(b, a)


def test_base_cube_convention():
    lat = DyadicLattice.standard(2)
    q = lat.cube(0, (0, 0))
    assert np.allclose(q.center, [0, 0])
    assert q.contains_point([-0.5, -0.5]) and not q.contains_point([0.5, 0.0])
    assert lat.cube_of([0.49, -0.5], 0) == q


@given(st.integers(-6, 6), st.lists(st.integers(-50, 50), min_size=2, max_size=3))
@settings(max_examples=80, deadline=None)
def test_parent_contains_children(k, m):
    lat = DyadicLattice((0.25,) * len(m))
    q = lat.cube(k, m)
    for c in q.children():
        assert c.parent() == q
        assert q.contains_point(c.center)
    assert q.ancestor(3) == q.parent().parent().parent()


def test_single_atom_mass_and_density():
    lat = DyadicLattice.standard(2)
    q = lat.cube(0, (0, 0))
    mu = DiscreteMeasure(q.center[None, :], np.ones(1), 1.0)
    assert smoothed_cube_mass(mu, q) == 1.0
    assert density(mu, q, 1.0) == 1.0
    q1 = lat.cube(1, (0, 0))
    mu1 = DiscreteMeasure(q1.center[None, :], np.ones(1), 1.0)
    assert density(mu1, q1, 1.0) == 0.5
    far = DiscreteMeasure(q.center[None, :] + 4 * math.sqrt(2) + 1e-9, np.ones(1), 1.0)
    assert smoothed_cube_mass(far, q) == 0.0


@given(clouds(), st.integers(-3, 1), st.integers(0, 1000))
@settings(max_examples=60, deadline=None)
def test_mass_and_density_sandwich(mu, k, j):
    lat = DyadicLattice.standard(mu.dim)
    q = lat.cube_of(mu.points[j % mu.n_atoms], k)
    ell, d = q.side, mu.dim
    I = smoothed_cube_mass(mu, q)
    assert I == smoothed_mass(mu, q.center, 2 * math.sqrt(d) * ell)
    assert cube_mass(mu, q) <= I <= ball_mass(mu, q.center, q.ball_radius)
    # 8 sqrt(d) Q contains B_Q
    big = np.all(np.abs(mu.points - q.center) < 4 * math.sqrt(d) * ell, axis=1)
    D = density(mu, q, mu.s)
    assert cube_mass(mu, q) / ell ** mu.s <= D <= ball_mass(mu, q.center, q.ball_radius) / ell ** mu.s
    assert ball_mass(mu, q.center, q.ball_radius) <= np.sum(mu.weights[big]) * (1 + 1e-15)


@given(st.integers(-4, 4), st.integers(2, 3), st.integers(0, 2 ** 31 - 1))
@settings(max_examples=30, deadline=None)
def test_chain_of_inclusions(k, d, seed):
    rng = np.random.default_rng(seed)
    q = DyadicLattice.standard(d).cube(k, rng.integers(-5, 5, size=d))
    ell = q.side
    x = q.center + rng.uniform(-6, 6, size=(10_000, d)) * math.sqrt(d) * ell
    r = np.linalg.norm(x - q.center, axis=1)
    w = q.weight(x)
    assert np.all(w[r < 2 * math.sqrt(d) * ell] == 1.0)
    assert np.all(w[r >= 4 * math.sqrt(d) * ell] == 0.0)
    in3q = np.all(np.abs(x - q.center) < 1.5 * ell, axis=1)
    assert np.all(r[in3q] < 2 * math.sqrt(d) * ell)


@given(clouds(max_atoms=15), st.integers(-2, 1))
@settings(max_examples=25, deadline=None)
def test_charged_cubes_brute_force(mu, k):
    lat = DyadicLattice((0.1,) * mu.dim)
    assert charged_cubes(mu, lat, k, k) == brute_charged(mu, lat, k)


def test_single_atom_charged_count():
    for d in (2, 3):
        mu = DiscreteMeasure(np.full((1, d), 0.3), np.ones(1), 1.0)
        cubes = charged_cubes(mu, DyadicLattice.standard(d), 0, 0)
        assert 0 < len(cubes) <= (8 * math.sqrt(d) + 2) ** d
        assert all(np.linalg.norm(q.center - 0.3) < 4 * math.sqrt(d) for q in cubes)


def test_charged_cubes_canonical_order():
    mu = DiscreteMeasure(np.random.default_rng(0).uniform(size=(30, 2)), np.ones(30), 1.0)
    cubes = charged_cubes(mu, DyadicLattice.standard(2), -2, 0)
    assert cubes == sorted(cubes)
    with pytest.raises(ValueError):
        charged_cubes(mu, DyadicLattice.standard(2), 1, 0)


def test_containment_examples():
    lat = DyadicLattice.standard(3)
    q = lat.cube(-2, (3, -1, 5))
    assert not ball_containments(q, q, "half_contains")
    assert ball_containments(q, q.ancestor(8), "half_contains")
    assert ball_containments(q, q, "triple_in_triple")
    assert ball_containments(q, q, "contains")
    with pytest.raises(ValueError):
        ball_containments(q, q, "sideways")


@given(st.integers(-3, 3), st.integers(0, 4), st.lists(st.integers(-40, 40), min_size=2, max_size=2),
       st.lists(st.integers(-6, 6), min_size=2, max_size=2))
@settings(max_examples=150, deadline=None)
def test_containment_matches_float_off_ties(k, up, m, shift):
    lat = DyadicLattice.standard(2)
    small = lat.cube(k, m)
    big = lat.cube(k + up, [(a >> up) + s for a, s in zip(m, shift)])
    gap = np.linalg.norm(big.center - small.center)
    d = math.sqrt(2)
    lhs = gap + 4 * d * small.side - 2 * d * big.side
    if abs(lhs) > 1e-9 * big.side:
        assert ball_containments(small, big, "half_contains") == (lhs <= 0)
    sep = gap - 12 * d * (small.side + big.side)
    if abs(sep) > 1e-9 * big.side:
        assert triples_disjoint(small, big) == (sep >= 0)


def test_boundary_atoms_flagged():
    mu = DiscreteMeasure(np.array([[0.5, 0.1], [0.2, 0.2]]), np.ones(2), 1.0)
    assert list(boundary_atoms(mu, DyadicLattice.standard(2), 0)) == [0]


def test_default_levels_and_catalog():
    mu = DiscreteMeasure(np.array([[0.0, 0.0], [0.25, 0.0], [1.0, 1.0]]), np.ones(3), 1.0)
    lo, hi = default_levels(mu)
    assert lo == math.ceil(math.log2(mu.min_sep)) and hi == math.ceil(math.log2(mu.diam)) + 1
    cat = CubeCatalog(mu, DyadicLattice.standard(2), lo, hi)
    assert all(cat.mass(q) > 0 for q in cat)
    assert cat.sup_density == max(cat.density(q) for q in cat)


def test_dilation_maps_cubes():
    q = DyadicLattice((0.3, -0.2)).cube(-1, (4, 7))
    big = q.dilated(2)
    assert big.side == 2 * q.side
    assert np.allclose(big.center, 2 * q.center)
