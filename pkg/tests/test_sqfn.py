import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from carleson.generators import cantor_four_corner, plane_patch, random_cloud
from carleson.lattice import DyadicLattice, offset_window
from carleson.measure import DiscreteMeasure
from carleson.sqfn import (ConvSpec, SpatialHash, constituent, conv_bump_compare, field, indicator_norm, log_nodes,
                           overlap_bound, overlap_census, randomized_decomposition_check, sqfn_apply)
from conftest import clouds


def test_field_examples():
    one = DiscreteMeasure(np.array([[0.2, 0.3]]), np.ones(1), 1.0)
    assert np.all(field(one, [0.2, 0.3], 0.5) == 0)
    two = DiscreteMeasure(np.array([[-1.0, 0.0], [1.0, 0.0]]), np.ones(2), 1.0)
    assert np.allclose(field(two, [0.0, 0.0], 1.0), 0.0, atol=0)
    with pytest.raises(ValueError):
        field(two, [0, 0], 0.0)


@given(clouds(), st.floats(0.05, 2.0), st.integers(0, 2 ** 31 - 1))
@settings(max_examples=25, deadline=None)
def test_hashed_field_bitwise(mu, t, seed):
    rng = np.random.default_rng(seed)
    cache = SpatialHash(mu, t)
    lo, hi = mu.points.min(0) - 2 * t, mu.points.max(0) + 2 * t
    for x in rng.uniform(lo, hi, size=(200, mu.dim)):
        assert np.array_equal(cache.field(x), field(mu, x, t))


@given(clouds(), st.floats(0.05, 2.0), st.integers(0, 1000))
@settings(max_examples=30, deadline=None)
def test_field_antisymmetry(mu, t, k):
    # centre at x first so the reflection is a sign flip, exact in floating point
    centred = DiscreteMeasure(mu.points - mu.points[k % mu.n_atoms] - 0.01, mu.weights, mu.s)
    mirror = DiscreteMeasure(-centred.points, mu.weights, mu.s)
    origin = np.zeros(mu.dim)
    assert np.array_equal(field(mirror, origin, t), -field(centred, origin, t))


def test_sqfn_trivial_cases():
    mu = random_cloud(10, 2, 1.0, 1)
    assert sqfn_apply(mu, np.zeros(10), mu.points[0], 0.01, 1.0)[0] == 0.0
    one = DiscreteMeasure(np.zeros((1, 2)), np.ones(1), 1.0)
    assert sqfn_apply(one, np.ones(1), [0.0, 0.0], 0.01, 1.0)[0] == 0.0


def test_two_atom_against_quadrature():
    mu = DiscreteMeasure(np.array([[0.0, 0.0], [0.7, 0.2]]), np.array([1.0, 0.5]), 1.0)
    x = mu.points[0]
    val, flag = sqfn_apply(mu, np.ones(2), x, 0.05, 3.0, 64)
    exact = integrate.quad(lambda t: float((field(mu, x, t) ** 2).sum()) / t, 0.05, 3.0, limit=400,
                           points=[0.7280 / 2, 0.7280], epsrel=1e-12)[0]
    assert val == pytest.approx(math.sqrt(exact), rel=1e-4)
    assert not flag


def test_log_nodes():
    ts, h = log_nodes(1.0, 4.0, 16)
    assert len(ts) == 32 and h == pytest.approx(math.log(2) / 16)
    with pytest.raises(ValueError):
        log_nodes(1.0, 4.0, 3)


def test_constituent_examples():
    lat = DyadicLattice.standard(2)
    one = DiscreteMeasure(np.zeros((1, 2)), np.ones(1), 1.0)
    assert constituent(one, lat.cube(0, (0, 0)), 2.0).value == 0.0
    with pytest.raises(ValueError):
        constituent(one, lat.cube(0, (0, 0)), 1.0)
    cantor = cantor_four_corner(4)
    root = lat.cube_of([0.5, 0.5], 0)
    rec = constituent(cantor, root, 2.0, 16)
    fine = constituent(cantor, root, 2.0, 32)
    assert rec.value > 0 and not rec.quad_flag
    assert fine.value == pytest.approx(rec.value, rel=1e-3)


def test_constituent_nondecreasing_in_A():
    mu = cantor_four_corner(3)
    q = DyadicLattice.standard(2).cube_of([0.5, 0.5], -1)
    vals = [constituent(mu, q, A, 16).value for A in (2.0, 4.0, 8.0)]
    assert vals[0] <= vals[1] * (1 + 1e-12) and vals[1] <= vals[2] * (1 + 1e-12)


def test_plane_patch_constituent_vanishes_inside():
    # on a symmetric grid the interior field cancels exactly, so both resolutions sit at roundoff
    lat = DyadicLattice.standard(2)
    q = lat.cube_of([0.1, 0.0], -2)
    for h in (1 / 32, 1 / 64):
        mu = plane_patch(1, 8.0, h)
        assert constituent(mu, q, 2.0).value <= 1e-24 * mu.total_mass
    edge = constituent(plane_patch(1, 1.0, 1 / 64), lat.cube_of([0.5, 0.0], -2), 2.0).value
    assert edge > 1e-6


def test_overlap_census():
    for d in (2, 3):
        lat = DyadicLattice.standard(d)
        assert overlap_census(lat, 0, 1.0, lat.cube(0, (0,) * d).center) >= 1
        probes = np.random.default_rng(d).uniform(-3, 3, size=(50, d))
        counts = {overlap_census(lat, k, 2.0, (probes + 0.5) * 2.0 ** k - 0.5) for k in (-2, 0, 3)}  # about the corner
        assert len(counts) == 1
        assert counts.pop() <= overlap_bound(d, 2.0)


def test_overlap_census_enumeration_oracle():
    lat = DyadicLattice.standard(2)
    probes = np.random.default_rng(0).uniform(-2, 2, size=(300, 2))
    seen = overlap_census(lat, 0, 2.0, probes)
    brute = 0
    for p in probes:
        m = np.floor(p + 0.5).astype(int)
        ax = np.arange(-30, 31)
        idx = np.stack(np.meshgrid(ax, ax, indexing="ij"), -1).reshape(-1, 2) + m
        brute = max(brute, int((np.linalg.norm(idx - p, axis=1) < 2 * 4 * math.sqrt(2)).sum()))
    assert seen == brute
    assert offset_window(2, 1.0).shape[1] == 2


@given(clouds(max_atoms=12), st.floats(1.0, 1.999), st.integers(0, 3), st.integers(0, 2 ** 31 - 1))
@settings(max_examples=40, deadline=None)
def test_sign_decomposition(mu, t, k0, seed):
    f = np.random.default_rng(seed).uniform(-1, 1, mu.n_atoms)
    assert randomized_decomposition_check(mu, f, t, k0) <= 1e-12
    assert randomized_decomposition_check(mu, 3.0 * f, t, k0) <= 1e-12 * 9


def test_sign_decomposition_refuses():
    mu = random_cloud(5, 2, 1.0, 0)
    with pytest.raises(ValueError):
        randomized_decomposition_check(mu, np.ones(5), 1.0, 5)
    with pytest.raises(ValueError):
        randomized_decomposition_check(mu, np.ones(5), 2.0, 1)
    assert randomized_decomposition_check(mu, np.ones(5), 1.5, 0) == 0.0


def test_conv_identity_and_zero():
    mu = random_cloud(12, 2, 1.0, 2)
    f = np.random.default_rng(2).uniform(-1, 1, 12)
    unit = conv_bump_compare(mu, f, ConvSpec(atoms=((1.0, 1.0),)), nodes_per_octave=16)
    assert unit.factor == 1.0 and unit.lhs == pytest.approx(unit.rhs, rel=1e-12)
    zero = conv_bump_compare(mu, np.zeros(12), ConvSpec(atoms=((1.5, 1.0),)))
    assert zero.lhs == zero.rhs == 0.0


@given(st.integers(0, 2 ** 31 - 1))
@settings(max_examples=8, deadline=None)
def test_conv_bound_on_one_two(seed):
    rng = np.random.default_rng(seed)
    mu = random_cloud(10, 2, 1.0, seed)
    g = ConvSpec(density=lambda u: (u - 1.0) * (2.0 - u), support=(1.0, 2.0), nodes=16)
    cmp = conv_bump_compare(mu, rng.uniform(-1, 1, 10), g, nodes_per_octave=16)
    assert cmp.holds


def test_conv_rejects_negative_g():
    with pytest.raises(ValueError):
        ConvSpec(atoms=((1.0, -1.0),)).discretise()


def test_indicator_norm():
    lat = DyadicLattice.standard(2)
    one = DiscreteMeasure(np.array([[0.1, 0.1]]), np.ones(1), 1.0)
    vals = indicator_norm(one, lat.cube(0, (0, 0)), lat, 2.0, -2, 0)
    assert all(v == 0.0 for v in vals.values())
    small = indicator_norm(cantor_four_corner(2), lat.cube_of([0.5, 0.5], 1), lat, 2.0, -2, 0)
    big = indicator_norm(cantor_four_corner(3), lat.cube_of([0.5, 0.5], 1), lat, 2.0, -3, 0)
    assert sum(big.values()) > sum(small.values())
    with pytest.raises(ValueError):
        indicator_norm(one, lat.cube(0, (5, 5)), lat, 2.0, -1, 0)
