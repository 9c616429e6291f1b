"""Discrete measures, the radial bump and smoothed masses.

A :class:`DiscreteMeasure` is a weighted point cloud standing in for a
locally finite Borel measure on R^d.  Everything downstream evaluates the
fixed bump ``phi`` defined here.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.spatial import cKDTree
from scipy.special import expit

__all__ = [
    "DiscreteMeasure",
    "BumpProfile",
    "BUMP",
    "phi",
    "dphi",
    "eval_bump",
    "eval_bump_deriv",
    "ball_mass",
    "smoothed_mass",
    "perturb",
    "fsum",
    "load_measure",
    "save_measure",
]


def fsum(values) -> float:
    """Correctly rounded sum; independent of summation order."""
    return math.fsum(np.asarray(values, dtype=float).ravel().tolist())


def _transition_exponent(t):
    # phi = 1 / (1 + exp(g)) on (1, 2) with g = 1/(2-t) - 1/(t-1)
    return 1.0 / (2.0 - t) - 1.0 / (t - 1.0)


def phi(t):
    """Vectorised bump: 1 on [0,1], exponential glue on (1,2), 0 on [2,inf)."""
    t = np.asarray(t, dtype=float)
    out = np.where(t <= 1.0, 1.0, 0.0)
    mid = (t > 1.0) & (t < 2.0)
    if np.any(mid):
        tm = t[mid]
        out[mid] = expit(-_transition_exponent(tm))
    return out if out.ndim else float(out)


def dphi(t):
    """Vectorised derivative of :func:`phi`."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    mid = (t > 1.0) & (t < 2.0)
    if np.any(mid):
        tm = t[mid]
        g = _transition_exponent(tm)
        gprime = 1.0 / (2.0 - tm) ** 2 + 1.0 / (tm - 1.0) ** 2
        with np.errstate(over="ignore"):
            ch = np.cosh(0.5 * g)
            out[mid] = -gprime / (4.0 * ch * ch)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class BumpProfile:
    """The fixed bump and its derivative, with sup |phi'| cached."""

    def __call__(self, t):
        return phi(t)

    def deriv(self, t):
        return dphi(t)

    @cached_property
    def deriv_sup(self) -> float:
        # |phi'| is unimodal on (1, 2); a bounded search from a grid seed is exact to ~1e-12
        grid = np.linspace(1.0 + 1e-6, 2.0 - 1e-6, 20001)
        vals = np.abs(dphi(grid))
        i = int(np.argmax(vals))
        lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
        res = minimize_scalar(lambda u: -abs(dphi(u)), bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-13})
        return float(max(-res.fun, vals[i]))


BUMP = BumpProfile()


def eval_bump(t: float) -> float:
    if t < 0:
        raise ValueError(f"bump argument must be nonnegative, got {t}")
    return float(phi(t))


def eval_bump_deriv(t: float) -> float:
    if t < 0:
        raise ValueError(f"bump argument must be nonnegative, got {t}")
    return float(dphi(t))


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Weighted atoms in R^d with a dimension parameter ``s`` in (0, d).

    Arrays are copied and made read-only on construction.
    """

    points: np.ndarray
    weights: np.ndarray
    s: float
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        pts = np.array(self.points, dtype=float, copy=True)
        if pts.ndim == 1:
            pts = pts[None, :]
        w = np.array(self.weights, dtype=float, copy=True).ravel()
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise ValueError("points must be an (N, d) array with N >= 1")
        if pts.shape[1] < 2:
            raise ValueError("ambient dimension must be at least 2")
        if w.shape[0] != pts.shape[0]:
            raise ValueError("one weight per point required")
        if not np.all(np.isfinite(pts)) or not np.all(np.isfinite(w)):
            raise ValueError("non-finite coordinates or weights")
        if np.any(w <= 0):
            raise ValueError("weights must be strictly positive")
        if not (0.0 < float(self.s) < pts.shape[1]):
            raise ValueError(f"s must lie in (0, {pts.shape[1]}), got {self.s}")
        pts.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "s", float(self.s))
        if self.min_sep == 0.0:
            raise ValueError("coincident atoms; merge them before constructing the measure")

    @property
    def dim(self) -> int:
        return int(self.points.shape[1])

    @property
    def n_atoms(self) -> int:
        return int(self.points.shape[0])

    def __len__(self) -> int:
        return self.n_atoms

    @cached_property
    def tree(self) -> cKDTree:
        return cKDTree(self.points)

    @cached_property
    def min_sep(self) -> float:
        if self.n_atoms == 1:
            return math.inf
        dist, _ = self.tree.query(self.points, k=2)
        return float(dist[:, 1].min())

    @cached_property
    def diam(self) -> float:
        p = self.points
        best = 0.0
        for start in range(0, p.shape[0], 512):
            block = p[start:start + 512]
            d2 = ((block[:, None, :] - p[None, :, :]) ** 2).sum(-1)
            best = max(best, float(d2.max()))
        return math.sqrt(best)

    @cached_property
    def total_mass(self) -> float:
        return fsum(self.weights)

    @property
    def r_min_default(self) -> float:
        """Scale floor below which discrete outputs are unreliable."""
        return 2.0 * self.min_sep if math.isfinite(self.min_sep) else 0.0

    def restrict(self, mask: np.ndarray) -> "DiscreteMeasure":
        mask = np.asarray(mask, dtype=bool)
        if not mask.any():
            raise ValueError("restriction is empty")
        return DiscreteMeasure(self.points[mask], self.weights[mask], self.s, dict(self.metadata))

    def with_points(self, points: np.ndarray) -> "DiscreteMeasure":
        return DiscreteMeasure(points, self.weights, self.s, dict(self.metadata))

    def transformed(self, scale: float = 1.0, rotation: np.ndarray | None = None,
                    shift: np.ndarray | None = None) -> "DiscreteMeasure":
        p = np.asarray(self.points, dtype=float)
        if rotation is not None:
            p = p @ np.asarray(rotation).T
        p = scale * p
        if shift is not None:
            p = p + np.asarray(shift)
        return DiscreteMeasure(p, self.weights, self.s, {})

    def to_dict(self) -> dict[str, Any]:
        return {
            "dim": self.dim,
            "s": self.s,
            "points": self.points.tolist(),
            "weights": self.weights.tolist(),
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "DiscreteMeasure":
        for key in ("dim", "s", "points", "weights"):
            if key not in doc:
                raise ValueError(f"measure document lacks field {key!r}")
        mu = cls(np.asarray(doc["points"], dtype=float), np.asarray(doc["weights"], dtype=float),
                 float(doc["s"]), dict(doc.get("metadata") or {}))
        if mu.dim != int(doc["dim"]):
            raise ValueError(f"declared dim {doc['dim']} but points have dimension {mu.dim}")
        return mu


def save_measure(mu: DiscreteMeasure, path: str | Path) -> None:
    Path(path).write_text(json.dumps(mu.to_dict(), sort_keys=True) + "\n")


def load_measure(path: str | Path) -> DiscreteMeasure:
    return DiscreteMeasure.from_dict(json.loads(Path(path).read_text()))


def _distances(mu: DiscreteMeasure, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.sqrt(((mu.points - x) ** 2).sum(axis=1))


def ball_mass(mu: DiscreteMeasure, x, r: float) -> float:
    """mu(B(x, r)) for the open ball."""
    if r <= 0:
        raise ValueError("radius must be positive")
    d = _distances(mu, x)
    return fsum(mu.weights[d < r])


def smoothed_mass(mu: DiscreteMeasure, x, r: float) -> float:
    """I_mu(B(x, r)) = sum_i w_i phi(|x - x_i| / r)."""
    if r <= 0:
        raise ValueError("radius must be positive")
    d = _distances(mu, x)
    near = d < 2.0 * r
    return fsum(mu.weights[near] * phi(d[near] / r))


def perturb(mu: DiscreteMeasure, magnitude: float, seed: int) -> DiscreteMeasure:
    """Move every atom by an independent uniform vector in the ball of radius ``magnitude``."""
    if magnitude < 0:
        raise ValueError("magnitude must be nonnegative")
    if magnitude == 0:
        return DiscreteMeasure(mu.points, mu.weights, mu.s, dict(mu.metadata))
    rng = np.random.default_rng(seed)
    n, d = mu.points.shape
    g = rng.standard_normal((n, d))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    radii = magnitude * rng.random(n) ** (1.0 / d)
    return DiscreteMeasure(mu.points + g * radii[:, None], mu.weights, mu.s, dict(mu.metadata))
