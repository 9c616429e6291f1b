"""Recompute the derived constants and write them to the package calibration file.

Usage: python scripts/derive_constants.py [--out PATH] [--skip-regression]
"""

import argparse
import json
import math
from pathlib import Path

from carleson.coeffs import witness_constant
from carleson.energy import carleson_sweep, domination_constant
from carleson.filters import FilterConfig, inner_sum_bound, prune_constant, verify_down_lemmas
from carleson.generators import cantor_four_corner
from carleson.lattice import DyadicLattice, charged_cubes, default_levels
from carleson.measure import BUMP
from carleson.sqfn import overlap_bound

COMMAND = "python scripts/derive_constants.py"
DEFAULT_OUT = Path(__file__).resolve().parents[1] / "src" / "carleson" / "calibration.json"


def entry(value, derivation):
    return {"value": value, "derivation": derivation, "command": COMMAND}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=DEFAULT_OUT)
    ap.add_argument("--skip-regression", action="store_true")
    args = ap.parse_args()

    doc = {
        "bump_deriv_sup": entry(BUMP.deriv_sup, "sup |phi'| of the expit bump, closed form"),
        "C_dom": {
            kind: {str(s): entry(domination_constant(kind, s), "octave bound, 2^(2s) or 2^(2s+2) times ln 2")
                   for s in (1, 2)}
            for kind in ("wolff", "jones")
        },
        "C_w": {str(d): entry(witness_constant(d), "sqrt(d) (26 + 169 sup|phi'| / 6)") for d in (2, 3, 4)},
        "C_prune": {str(s): entry(prune_constant(s), "64 4^(2s+2) / ln(4/3)") for s in (1, 2, 3)},
        "inner_sum_bound": {
            f"d={d},eps={eps}": entry(inner_sum_bound(d, eps), "(24 sqrt(d) + 1)^d (1/(2 eps ln 2) + 1)")
            for d in (2, 3) for eps in (0.05, 0.1)
        },
        "overlap_bound": {
            f"d={d},A={A}": entry(overlap_bound(d, A), "(8 sqrt(d) A + 2)^d")
            for d in (2, 3) for A in (2.0, 4.0)
        },
    }
    if not args.skip_regression:
        lat = DyadicLattice.standard(2)
        vals = []
        for g in range(3, 7):
            mu = cantor_four_corner(g)
            vals.append(carleson_sweep(mu, lat, "jones", *default_levels(mu)).value)
        inc = [b - a for a, b in zip(vals, vals[1:])]
        doc["regression"] = {
            "cantor_four_corner_jones": entry(vals, "Carleson sweep, generations 3..6, default levels"),
            "cantor_increment_spread": entry(max(inc) / min(inc), "max/min successive increment"),
            "cantor_increment_per_generation": entry(inc[-1], "increment from generation 5 to 6"),
        }
        mu = cantor_four_corner(5)
        G = charged_cubes(mu, lat, -3, 1)
        rep = verify_down_lemmas(mu, lat, G, G, FilterConfig(1.0, eps=0.05))
        doc["regression"]["cantor5_down_lemmas"] = entry(
            {"ratio_down": rep.ratio_down, "ratio_stupid": rep.ratio_stupid, "members": len(rep.down)},
            "generation 5, levels -3..1, eps 0.05, G' = G")
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    args.out.write_text(text)
    print(f"wrote {args.out}")
    for key in ("C_w", "C_prune"):
        for sub, e in doc[key].items():
            print(f"{key}[{sub}] = {e['value']:.6g}")
    assert all(math.isfinite(e["value"]) for e in doc["C_w"].values())


if __name__ == "__main__":
    main()
