import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from carleson.coeffs import optimal_plane
from carleson.energy import (carleson_sweep, domination_constant, dyadic_energy_sum, jones_exact,
                             verify_dyadic_domination, wolff_exact)
from carleson.generators import cantor_four_corner, plane_patch, random_cloud
from carleson.lattice import DyadicLattice, charged_cubes, smoothed_cube_mass
from carleson.measure import DiscreteMeasure
from conftest import clouds


def quad_oracle(mu, kind, a, b):
    """Adaptive quadrature of the radial integrand, split at every pairwise distance."""
    s = mu.s
    total = 0.0
    for i in range(mu.n_atoms):
        dist = np.linalg.norm(mu.points - mu.points[i], axis=1)

        def g(r):
            inside = dist < r
            m = mu.weights[inside].sum()
            if kind == "wolff":
                return m * m * r ** (-2 * s - 1)
            if inside.sum() <= int(s):
                return 0.0
            res = optimal_plane(mu.points[inside], mu.weights[inside], int(s))[1]
            return res * m * r ** (-2 * s - 3)

        edges = np.unique(np.concatenate([[a, b], dist[(dist > a) & (dist < b)]]))
        total += mu.weights[i] * sum(integrate.quad(g, lo, hi, epsabs=0, epsrel=1e-11)[0]
                                     for lo, hi in zip(edges[:-1], edges[1:]))
    return total


def test_single_atom_wolff():
    mu = DiscreteMeasure(np.zeros((1, 2)), np.array([0.7]), 1.0)
    rep = wolff_exact(mu, r_min=0.5, r_max=3.0)
    assert rep.total == pytest.approx(0.7 * 0.7 ** 2 * (0.5 ** -2 - 3.0 ** -2) / 2, rel=1e-14)
    tail = wolff_exact(mu, r_min=0.5)
    assert tail.total == pytest.approx(0.7 ** 3 * 0.5 ** -2 / 2, rel=1e-14)


def test_wolff_needs_positive_rmin():
    mu = cantor_four_corner(1)
    with pytest.raises(ValueError):
        wolff_exact(mu, r_min=0.0)
    with pytest.raises(ValueError):
        wolff_exact(mu, r_min=1.0, r_max=0.5)


def test_jones_rejects_fractional_s():
    mu = random_cloud(10, 2, 1.3, 0)
    with pytest.raises(ValueError):
        jones_exact(mu)
    with pytest.raises(ValueError):
        dyadic_energy_sum(mu, DyadicLattice.standard(2), "jones", 0, 1)


def test_jones_vanishes_on_planes():
    mu = plane_patch(1, 2.0, 0.1)
    assert jones_exact(mu).total == pytest.approx(0.0, abs=1e-20)
    lat = DyadicLattice.standard(2)
    assert dyadic_energy_sum(mu, lat, "jones", -2, 0).total <= 1e-20
    assert carleson_sweep(mu, lat, "jones", -2, 0).value <= 1e-20
    single = DiscreteMeasure(np.zeros((1, 2)), np.ones(1), 1.0)
    assert jones_exact(single).total == 0.0


@given(clouds(dim=2, max_atoms=12, s=1.0))
@settings(max_examples=12, deadline=None)
def test_closed_forms_match_quadrature(mu):
    a, b = 0.05, 10.0
    w = wolff_exact(mu, r_min=a, r_max=b).total
    assert w == pytest.approx(quad_oracle(mu, "wolff", a, b), rel=1e-6)
    j = jones_exact(mu, r_min=a, r_max=b).total
    assert j == pytest.approx(quad_oracle(mu, "jones", a, b), rel=1e-5, abs=1e-14)


def test_cantor_jones_against_quadrature():
    mu = cantor_four_corner(3)
    j = jones_exact(mu, r_min=1e-3, r_max=8.0).total
    assert j == pytest.approx(quad_oracle(mu, "jones", 1e-3, 8.0), rel=1e-5)


def test_ties_merge():
    # four atoms at equal distance from the centre atom
    pts = np.array([[0, 0], [1, 0], [-1, 0], [0, 1], [0, -1]], dtype=float)
    mu = DiscreteMeasure(pts, np.ones(5), 1.0)
    perm = DiscreteMeasure(pts[[0, 3, 1, 4, 2]], np.ones(5), 1.0)
    assert wolff_exact(mu, r_min=0.1).total == pytest.approx(wolff_exact(perm, r_min=0.1).total, rel=1e-14)
    assert jones_exact(mu).total == pytest.approx(jones_exact(perm).total, rel=1e-14)


@given(clouds(dim=2, max_atoms=20, s=1.0), st.floats(0.01, 0.3), st.floats(0.5, 5.0))
@settings(max_examples=25, deadline=None)
def test_truncation_monotone(mu, a, b):
    for fn in (wolff_exact, jones_exact):
        inner = fn(mu, r_min=a, r_max=b).total
        outer = fn(mu, r_min=a / 2, r_max=2 * b).total
        assert 0 <= inner <= outer * (1 + 1e-12)
        rep = fn(mu, r_min=a, r_max=b)
        assert rep.total == pytest.approx(math.fsum(rep.per_atom), rel=1e-15, abs=0)


@given(clouds(dim=2, max_atoms=20, s=1.0), st.integers(-1, 1))
@settings(max_examples=25, deadline=None)
def test_restriction_monotone(mu, k):
    q = DyadicLattice.standard(2).cube_of(mu.points[0], k)
    rel = (mu.points - q.corner) / q.side
    inside = np.all((rel >= 0) & (rel < 1), axis=1)
    restricted = DiscreteMeasure(mu.points[inside], mu.weights[inside], 1.0)
    # over Q: mu|Q energy is at most the full-measure energy integrated over atoms in Q
    full_w = wolff_exact(mu, r_min=0.01).per_atom
    assert wolff_exact(mu, q, r_min=0.01).total <= math.fsum(full_w[inside]) * (1 + 1e-12)
    assert wolff_exact(mu, q, r_min=0.01).total == pytest.approx(wolff_exact(restricted, r_min=0.01).total)


def test_dyadic_sum_single_atom():
    w = 0.8
    mu = DiscreteMeasure(np.array([[0.1, 0.2]]), np.array([w]), 1.0)
    lat = DyadicLattice.standard(2)
    k = -1
    cubes = charged_cubes(mu, lat, k, k)
    expect = math.fsum((smoothed_cube_mass(mu, q) / 2.0 ** k) ** 2 * smoothed_cube_mass(mu, q) for q in cubes)
    assert dyadic_energy_sum(mu, lat, "wolff", k, k).total == pytest.approx(expect, rel=1e-14)


@given(clouds(dim=2, max_atoms=25, s=1.0))
@settings(max_examples=15, deadline=None)
def test_dyadic_sum_grows_with_range(mu):
    lat = DyadicLattice.standard(2)
    a = dyadic_energy_sum(mu, lat, "wolff", -1, 0).total
    b = dyadic_energy_sum(mu, lat, "wolff", -2, 1).total
    assert a <= b


def test_domination_constant_pinned():
    assert domination_constant("wolff", 1.0) == pytest.approx(4 * math.log(2))
    assert domination_constant("jones", 1.0) == pytest.approx(16 * math.log(2))


def test_domination_single_atom_hand_value():
    # one atom: octave integral int r^{-3} dr, majorant sum over level-(k+1) cubes of D^2 phi_Q(x)
    mu = DiscreteMeasure(np.array([[0.3, 0.1]]), np.ones(1), 1.0)
    lat = DyadicLattice.standard(2)
    rep = verify_dyadic_domination(mu, lat, "wolff", -2, 0)
    assert rep.violations == 0 and 0 < rep.max_ratio <= rep.constant
    for j, k in enumerate(range(-2, 1)):
        octave = (2.0 ** (-2 * k) - 2.0 ** (-2 * (k + 1))) / 2
        maj = sum((smoothed_cube_mass(mu, q) / 2.0 ** (k + 1)) ** 2 * float(q.weight(mu.points[0]))
                  for q in charged_cubes(mu, lat, k + 1, k + 1))
        assert rep.ratios[0, j] == pytest.approx(octave / maj, rel=1e-12)


@given(st.integers(0, 2 ** 31 - 1))
@settings(max_examples=15, deadline=None)
def test_domination_random(seed):
    mu = random_cloud(30, 2, 1.0, seed)
    lat = DyadicLattice.standard(2)
    for kind in ("wolff", "jones"):
        rep = verify_dyadic_domination(mu, lat, kind, -4, 1)
        assert rep.violations == 0 and rep.max_ratio <= domination_constant(kind, 1.0)


def test_sweep_grows_with_generation():
    lat = DyadicLattice.standard(2)
    vals = [carleson_sweep(cantor_four_corner(g), lat, "jones", -g - 1, 1).value for g in (2, 3, 4)]
    assert vals[0] < vals[1] < vals[2]
    res = carleson_sweep(cantor_four_corner(3), lat, "jones", -4, 1)
    assert res.argmax is not None and res.per_cube[res.argmax] == res.value
