"""Multiscale coefficients, energies and filters for discrete measures."""

import json
from importlib import resources

from .measure import (BUMP, DiscreteMeasure, ball_mass, eval_bump, eval_bump_deriv, load_measure, perturb,
                      save_measure, smoothed_mass)
from .generators import FAMILIES, GeneratorSpec, generate
from .lattice import (CubeCatalog, DyadicCube, DyadicLattice, charged_cubes, cube_ratio, density,
                      smoothed_cube_mass)
from .coeffs import AffinePlane, alpha_cube, beta_ball, beta_cube, optimal_plane, vartheta
from .energy import carleson_sweep, dyadic_energy_sum, jones_exact, verify_dyadic_domination, wolff_exact
from .sqfn import constituent, field, sqfn_apply
from .symmetry import SymmetryConfig, mattila_preiss_residual, symmetry_defect
from .filters import FilterConfig, g_down, pruning_check, squash, up_filter
from .suites import SUITES, SuiteParams, run_suite

__version__ = "0.1.0"


def calibration() -> dict:
    """Derived constants and regression values shipped with the package."""
    return json.loads(resources.files(__name__).joinpath("calibration.json").read_text())


__all__ = [
    "BUMP", "DiscreteMeasure", "ball_mass", "eval_bump", "eval_bump_deriv", "load_measure", "perturb",
    "save_measure", "smoothed_mass", "FAMILIES", "GeneratorSpec", "generate", "CubeCatalog", "DyadicCube",
    "DyadicLattice", "charged_cubes", "cube_ratio", "density", "smoothed_cube_mass", "AffinePlane",
    "alpha_cube", "beta_ball", "beta_cube", "optimal_plane", "vartheta", "carleson_sweep",
    "dyadic_energy_sum", "jones_exact", "verify_dyadic_domination", "wolff_exact", "constituent", "field",
    "sqfn_apply", "SymmetryConfig", "mattila_preiss_residual", "symmetry_defect", "FilterConfig", "g_down",
    "pruning_check", "squash", "up_filter", "SUITES", "SuiteParams", "run_suite", "calibration",
]
