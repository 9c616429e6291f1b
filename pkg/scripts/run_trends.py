"""Print the Carleson sweep trends behind the theorem-trend acceptance check.

Usage: python scripts/run_trends.py
"""

from carleson.energy import carleson_sweep
from carleson.generators import cantor_four_corner, cantor_self_similar, lipschitz_graph
from carleson.lattice import DyadicLattice, default_levels


def sweep(mu, kind):
    return carleson_sweep(mu, DyadicLattice.standard(mu.dim), kind, *default_levels(mu)).value


def main():
    print("family\tparameter\tN\tkind\tenergy_per_mass")
    for g in range(3, 7):
        mu = cantor_four_corner(g)
        print(f"cantor_four_corner\tgeneration={g}\t{mu.n_atoms}\tjones\t{sweep(mu, 'jones'):.6g}")
    for h in (1 / 64, 1 / 128, 1 / 256):
        mu = lipschitz_graph(1, 0.3, 4.0, h, seed=0)
        print(f"lipschitz_graph\tgrid_step={h:g}\t{mu.n_atoms}\tjones\t{sweep(mu, 'jones'):.6g}")
    for g in range(2, 6):
        mu = cantor_self_similar(2, 1.0 / 3.0, g)
        print(f"cantor_self_similar\tgeneration={g}\t{mu.n_atoms}\twolff\t{sweep(mu, 'wolff'):.6g}")


if __name__ == "__main__":
    main()
