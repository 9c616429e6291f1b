"""Example measure families used by the verification suites."""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np

from .measure import DiscreteMeasure

__all__ = [
    "FAMILIES",
    "GeneratorSpec",
    "plane_patch",
    "lipschitz_graph",
    "cantor_four_corner",
    "cantor_self_similar",
    "validate_translate_set",
    "phi_symmetric_example",
    "generate",
    "random_cloud",
]

FAMILIES = (
    "plane_patch",
    "lipschitz_graph",
    "cantor_four_corner",
    "cantor_self_similar",
    "phi_symmetric_example",
)


@dataclass(frozen=True)
class GeneratorSpec:
    """A measure family plus its parameters.

    ``params`` keys per family:

    * plane_patch: n, extent, grid_step, dim (default n + 1)
    * lipschitz_graph: n, lip_const, extent, grid_step, dim (default n + 1), modes (default 6)
    * cantor_four_corner: generation
    * cantor_self_similar: d, contraction_ratio, generation
    * phi_symmetric_example: k, translate_set, density, extent, grid_step, dim
    """

    family: str
    params: dict[str, Any] = field(default_factory=dict)
    s: float | None = None

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "GeneratorSpec":
        return cls(doc["family"], dict(doc.get("params", {})), doc.get("s"))


def _grid(n: int, extent: float, step: float) -> np.ndarray:
    if extent <= 0 or step <= 0:
        raise ValueError("extent and grid_step must be positive")
    count = int(round(extent / step)) + 1
    axis = -0.5 * extent + step * np.arange(count)
    mesh = np.meshgrid(*([axis] * n), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def _box(points: np.ndarray) -> list[list[float]]:
    return [points.min(axis=0).tolist(), points.max(axis=0).tolist()]


def plane_patch(n: int, extent: float, grid_step: float, dim: int | None = None,
                s: float | None = None) -> DiscreteMeasure:
    dim = n + 1 if dim is None else dim
    if not 0 < n < dim:
        raise ValueError(f"plane dimension {n} must lie in (0, {dim})")
    nodes = _grid(n, extent, grid_step)
    pts = np.zeros((nodes.shape[0], dim))
    pts[:, :n] = nodes
    w = np.full(nodes.shape[0], grid_step ** n)
    meta = {"family": "plane_patch", "support_box": _box(pts), "grid_step": grid_step}
    return DiscreteMeasure(pts, w, float(n) if s is None else s, meta)


def lipschitz_graph(n: int, lip_const: float, extent: float, grid_step: float, seed: int = 0,
                    dim: int | None = None, modes: int = 6, s: float | None = None) -> DiscreteMeasure:
    """Graph of a random trigonometric function with Lipschitz constant <= lip_const."""
    dim = n + 1 if dim is None else dim
    if not 0 < n < dim:
        raise ValueError(f"graph dimension {n} must lie in (0, {dim})")
    if lip_const < 0:
        raise ValueError("lip_const must be nonnegative")
    rng = np.random.default_rng(seed)
    nodes = _grid(n, extent, grid_step)
    freqs = rng.normal(size=(modes, n)) * (2.0 * math.pi / extent) * 2.0
    phases = rng.uniform(0, 2 * math.pi, size=modes)
    amps = rng.uniform(0.5, 1.0, size=modes)
    # |grad sum a_j sin(<w_j,u>+c_j)| <= sum a_j |w_j|
    norm = float(np.sum(amps * np.linalg.norm(freqs, axis=1)))
    height = lip_const / norm * (np.sin(nodes @ freqs.T + phases) @ amps)
    pts = np.zeros((nodes.shape[0], dim))
    pts[:, :n] = nodes
    pts[:, n] = height
    w = np.full(nodes.shape[0], grid_step ** n)
    meta = {"family": "lipschitz_graph", "support_box": _box(pts), "grid_step": grid_step}
    return DiscreteMeasure(pts, w, float(n) if s is None else s, meta)


def _self_similar(dim: int, ratio: float, generation: int) -> np.ndarray:
    """Centres of the generation-g corner cubes of the unit cube."""
    if not 0 < ratio < 0.5:
        raise ValueError("contraction_ratio must lie in (0, 1/2)")
    if generation < 0:
        raise ValueError("generation must be nonnegative")
    corners = np.array(list(itertools.product((0.0, 1.0), repeat=dim)))
    pts = np.zeros((1, dim))  # lower-left corners
    side = 1.0
    for _ in range(generation):
        side_next = side * ratio
        offsets = corners * (side - side_next)
        pts = (pts[:, None, :] + offsets[None, :, :]).reshape(-1, dim)
        side = side_next
    return pts + 0.5 * side


def cantor_four_corner(generation: int) -> DiscreteMeasure:
    pts = _self_similar(2, 0.25, generation)
    w = np.full(pts.shape[0], 4.0 ** (-generation))
    return DiscreteMeasure(pts, w, 1.0, {"family": "cantor_four_corner", "generation": generation})


def cantor_self_similar(d: int, contraction_ratio: float, generation: int,
                        s: float | None = None) -> DiscreteMeasure:
    pts = _self_similar(d, contraction_ratio, generation)
    children = 2 ** d
    w = np.full(pts.shape[0], float(children) ** (-generation))
    natural = math.log(children) / math.log(1.0 / contraction_ratio)
    if s is None:
        s = natural
    return DiscreteMeasure(pts, w, s, {"family": "cantor_self_similar", "generation": generation,
                                       "similarity_dimension": natural})


def validate_translate_set(translates: np.ndarray, density: np.ndarray, k: int,
                           tol: float = 1e-9) -> None:
    """Check the symmetry of (E, f) inside the bounding box of E.

    E must contain 0, meet the k-plane V (first k axes) only at 0, and satisfy
    2y - x in E with f(2y - x) = f(x) whenever 2y - x stays inside the box of E.
    """
    E = np.asarray(translates, dtype=float)
    f = np.asarray(density, dtype=float)
    if E.ndim != 2 or f.shape != (E.shape[0],):
        raise ValueError("translate_set must be (m, d) with one density value per translate")
    if np.any(f < 0):
        raise ValueError("density must be nonnegative")
    scale = max(1.0, float(np.abs(E).max()))
    if not np.any(np.all(np.abs(E) <= tol * scale, axis=1)):
        raise ValueError("translate_set must contain the origin")
    normal = E[:, k:]
    for i, e in enumerate(E):
        if np.all(np.abs(normal[i]) <= tol * scale) and np.any(np.abs(e) > tol * scale):
            raise ValueError("a nonzero translate lies in V; E must meet V only at the origin")
    lo, hi = E.min(axis=0) - tol * scale, E.max(axis=0) + tol * scale
    for i, j in itertools.product(range(E.shape[0]), repeat=2):
        refl = 2 * E[j] - E[i]
        if np.all(refl >= lo) and np.all(refl <= hi):
            hit = np.all(np.abs(E - refl) <= tol * scale, axis=1)
            if not hit.any():
                raise ValueError(f"translate set not symmetric: 2*E[{j}] - E[{i}] missing")
            if abs(f[int(np.argmax(hit))] - f[i]) > tol * max(1.0, abs(f[i])):
                raise ValueError(f"density not symmetric between E[{i}] and its reflection about E[{j}]")


def phi_symmetric_example(k: int, translate_set, density, extent: float, grid_step: float,
                          dim: int | None = None, s: float | None = None) -> DiscreteMeasure:
    """Grid quadrature of sum_{x in E} f(x) H^k restricted to V + x, V = span(e_1..e_k)."""
    E = np.atleast_2d(np.asarray(translate_set, dtype=float))
    dim = E.shape[1] if dim is None else dim
    if E.shape[1] != dim:
        raise ValueError("translate vectors must live in the ambient dimension")
    if not 0 < k < dim:
        raise ValueError(f"k must lie in (0, {dim})")
    f = np.asarray(density, dtype=float)
    validate_translate_set(E, f, k)
    nodes = _grid(k, extent, grid_step)
    pieces, weights = [], []
    for e, fe in zip(E, f):
        if fe == 0:
            continue
        p = np.zeros((nodes.shape[0], dim))
        p[:, :k] = nodes
        pieces.append(p + e)
        weights.append(np.full(nodes.shape[0], fe * grid_step ** k))
    pts = np.concatenate(pieces)
    # interior region: patch extent along V, translate extent across it
    lo = np.concatenate([np.full(k, -0.5 * extent), E.min(axis=0)[k:]])
    hi = np.concatenate([np.full(k, 0.5 * extent), E.max(axis=0)[k:]])
    lo[:k] += E.min(axis=0)[:k]
    hi[:k] += E.max(axis=0)[:k]
    meta = {"family": "phi_symmetric_example", "support_box": [lo.tolist(), hi.tolist()],
            "grid_step": grid_step}
    return DiscreteMeasure(pts, np.concatenate(weights), float(k) if s is None else s, meta)


def generate(spec: GeneratorSpec, seed: int = 0) -> DiscreteMeasure:
    p = dict(spec.params)
    fam = spec.family
    if fam == "plane_patch":
        return plane_patch(int(p["n"]), float(p["extent"]), float(p["grid_step"]), p.get("dim"), spec.s)
    if fam == "lipschitz_graph":
        return lipschitz_graph(int(p["n"]), float(p["lip_const"]), float(p["extent"]),
                               float(p["grid_step"]), seed=seed, dim=p.get("dim"),
                               modes=int(p.get("modes", 6)), s=spec.s)
    if fam == "cantor_four_corner":
        mu = cantor_four_corner(int(p["generation"]))
        return mu if spec.s is None else DiscreteMeasure(mu.points, mu.weights, spec.s, mu.metadata)
    if fam == "cantor_self_similar":
        return cantor_self_similar(int(p["d"]), float(p["contraction_ratio"]), int(p["generation"]), spec.s)
    if fam == "phi_symmetric_example":
        return phi_symmetric_example(int(p["k"]), p["translate_set"], p["density"], float(p["extent"]),
                                     float(p["grid_step"]), p.get("dim"), spec.s)
    raise ValueError(f"unknown family {fam!r}; expected one of {FAMILIES}")


def random_cloud(n_atoms: int, dim: int, s: float, seed: int, spread: float = 1.0) -> DiscreteMeasure:
    """Uniform atoms in [0, spread]^dim with random weights in [0.5, 1.5] / n_atoms."""
    rng = np.random.default_rng(seed)
    pts = rng.random((n_atoms, dim)) * spread
    w = rng.uniform(0.5, 1.5, n_atoms) / n_atoms
    return DiscreteMeasure(pts, w, s, {"family": "random_cloud"})
