import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from carleson.generators import (GeneratorSpec, cantor_four_corner, cantor_self_similar, generate,
                                 lipschitz_graph, phi_symmetric_example, plane_patch)
from carleson.measure import (BUMP, DiscreteMeasure, ball_mass, dphi, eval_bump, eval_bump_deriv, load_measure,
                              perturb, phi, save_measure, smoothed_mass)
from conftest import clouds


# bump profile

def test_bump_examples():
    assert eval_bump(0.5) == 1.0
    assert eval_bump(2.0) == 0.0
    assert eval_bump(1.5) == pytest.approx(0.5, abs=1e-15)
    assert eval_bump_deriv(0.7) == 0.0
    assert eval_bump_deriv(3.0) == 0.0


def test_bump_rejects_negative():
    with pytest.raises(ValueError):
        eval_bump(-0.1)
    with pytest.raises(ValueError):
        eval_bump_deriv(-1.0)


def test_bump_closed_form_oracle():
    # q(u) = exp(-1/u) glued on (1, 2), written out independently
    for t in np.linspace(1.01, 1.99, 37):
        a, b = math.exp(-1.0 / (2.0 - t)), math.exp(-1.0 / (t - 1.0))
        assert eval_bump(t) == pytest.approx(a / (a + b), rel=1e-13)


def test_derivative_matches_finite_differences():
    t = np.linspace(0.0, 2.5, 1000)
    h = 1e-6
    fd = (phi(t + h) - phi(np.maximum(t - h, 0.0))) / (t + h - np.maximum(t - h, 0.0))
    assert np.max(np.abs(dphi(t) - fd)) <= 1e-6
    assert eval_bump_deriv(1.5) == pytest.approx((eval_bump(1.5 + 1e-6) - eval_bump(1.5 - 1e-6)) / 2e-6, rel=1e-8)


def test_bump_shape():
    t = np.linspace(0.0, 3.0, 3001)
    v = phi(t)
    assert np.all(np.diff(v) <= 0)
    assert np.all((v >= 0) & (v <= 1))
    assert np.all(v[t <= 1] == 1) and np.all(v[t >= 2] == 0)
    assert np.all(dphi(t) <= 0)


def test_deriv_sup_dominates_grid():
    t = np.linspace(1.0, 2.0, 20001)
    assert np.max(np.abs(dphi(t))) <= BUMP.deriv_sup
    assert np.max(np.abs(dphi(t))) == pytest.approx(BUMP.deriv_sup, rel=1e-6)


# masses

def test_smoothed_mass_examples():
    one = DiscreteMeasure(np.zeros((1, 2)), np.ones(1), 1.0)
    assert smoothed_mass(one, [0.0, 0.0], 0.3) == 1.0
    two = DiscreteMeasure(np.array([[0.0, 0.0], [3.0, 0.0]]), np.ones(2), 1.0)
    assert smoothed_mass(two, [0.0, 0.0], 1.0) == 1.0


def test_ball_mass_is_open():
    mu = DiscreteMeasure(np.array([[0.0, 0.0], [1.0, 0.0]]), np.array([1.0, 2.0]), 1.0)
    assert ball_mass(mu, [0.0, 0.0], 1.0) == 1.0
    assert ball_mass(mu, [0.0, 0.0], 1.0 + 1e-12) == 3.0


@given(clouds(), st.floats(0.01, 5.0), st.integers(0, 1000))
@settings(max_examples=60, deadline=None)
def test_sandwich(mu, r, k):
    x = mu.points[k % mu.n_atoms] + 0.1
    assert ball_mass(mu, x, r) <= smoothed_mass(mu, x, r) <= ball_mass(mu, x, 2 * r)


@given(clouds(), st.integers(0, 1000))
@settings(max_examples=30, deadline=None)
def test_ball_mass_monotone(mu, k):
    x = mu.points[k % mu.n_atoms]
    vals = [ball_mass(mu, x, r) for r in np.geomspace(1e-3, 10, 40)]
    assert all(a <= b for a, b in zip(vals, vals[1:]))


# measure invariants

def test_measure_validation():
    with pytest.raises(ValueError):
        DiscreteMeasure(np.zeros((1, 2)), np.array([0.0]), 1.0)
    with pytest.raises(ValueError):
        DiscreteMeasure(np.zeros((1, 2)), np.array([1.0]), 2.0)
    with pytest.raises(ValueError):
        DiscreteMeasure(np.zeros((0, 2)), np.zeros(0), 1.0)


@given(clouds(max_atoms=25))
@settings(max_examples=30, deadline=None)
def test_cached_geometry_brute_force(mu):
    if mu.n_atoms < 2:
        return
    d = np.sqrt(((mu.points[:, None] - mu.points[None]) ** 2).sum(-1))
    assert mu.diam == pytest.approx(d.max(), rel=1e-12)
    np.fill_diagonal(d, np.inf)
    assert mu.min_sep == pytest.approx(d.min(), rel=1e-12)


def test_file_round_trip(tmp_path):
    mu = cantor_four_corner(2)
    path = tmp_path / "m.json"
    save_measure(mu, path)
    doc = json.loads(path.read_text())
    assert {"dim", "s", "points", "weights", "metadata"} <= set(doc)
    back = load_measure(path)
    assert np.array_equal(back.points, mu.points) and np.array_equal(back.weights, mu.weights)
    assert back.s == mu.s and back.min_sep == mu.min_sep


def test_loader_validates(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"dim": 2, "s": 1.0, "points": [[0, 0]], "weights": [-1.0], "metadata": {}}))
    with pytest.raises(ValueError):
        load_measure(path)


# perturbation

def test_perturb_contract():
    mu = cantor_four_corner(3)
    assert np.array_equal(perturb(mu, 0.0, 1).points, mu.points)
    a, b = perturb(mu, 0.01, 7), perturb(mu, 0.01, 7)
    assert np.array_equal(a.points, b.points)
    assert np.max(np.linalg.norm(a.points - mu.points, axis=1)) <= 0.01
    assert np.array_equal(a.weights, mu.weights)


# generators

def test_plane_patch_example():
    mu = plane_patch(1, 1.0, 0.01)
    assert mu.n_atoms == 101
    assert mu.total_mass == pytest.approx(1.01)
    centred = mu.points - mu.points.mean(0)
    assert np.linalg.matrix_rank(centred, tol=1e-9) == 1


def test_cantor_examples():
    mu = cantor_four_corner(2)
    assert mu.n_atoms == 16 and np.all(mu.weights == 1 / 16) and mu.total_mass == 1.0
    for g in range(1, 6):
        assert cantor_four_corner(g).total_mass == 1.0
    sim = cantor_self_similar(2, 1 / 3, 3)
    assert sim.total_mass == 1.0 and sim.s == pytest.approx(math.log(4) / math.log(3))


def test_flat_graph_is_planar():
    mu = lipschitz_graph(1, 0.0, 2.0, 0.05, seed=3)
    centred = mu.points - mu.points.mean(0)
    assert np.linalg.svd(centred, compute_uv=False)[-1] <= 1e-9


def test_lipschitz_bound_respected():
    mu = lipschitz_graph(1, 0.3, 2.0, 0.01, seed=1)
    x, y = mu.points[:, 0], mu.points[:, 1]
    slopes = np.abs(np.diff(y) / np.diff(x))
    assert slopes.max() <= 0.3 + 1e-9


def test_generate_deterministic():
    spec = GeneratorSpec("lipschitz_graph", {"n": 1, "lip_const": 0.5, "extent": 1.0, "grid_step": 0.05})
    a, b = generate(spec, 4), generate(spec, 4)
    assert np.array_equal(a.points, b.points)
    assert GeneratorSpec.from_dict(spec.to_dict()) == spec


def test_phi_symmetric_validation():
    with pytest.raises(ValueError):
        phi_symmetric_example(1, [[0.0, 0.0], [0.0, 1.0], [0.0, 3.0]], [1, 1, 1], 5.0, 0.1)
    with pytest.raises(ValueError):
        generate(GeneratorSpec("nope", {}), 0)


@given(st.integers(0, 2 ** 31 - 1))
@settings(max_examples=10, deadline=None)
def test_generated_sandwich(seed):
    mu = lipschitz_graph(1, 0.4, 1.0, 0.02, seed=seed)
    rng = np.random.default_rng(seed)
    for _ in range(10):
        x, r = rng.uniform(-1, 1, 2), float(rng.uniform(0.01, 1.0))
        assert ball_mass(mu, x, r) <= smoothed_mass(mu, x, r) <= ball_mass(mu, x, 2 * r)
