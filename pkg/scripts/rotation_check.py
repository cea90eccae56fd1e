"""Rotation equivariance of the computed map: d(T'(R x), R T(x)) against 2h.

    python scripts/rotation_check.py --N 1000 2000 --seed 4
"""
import argparse

import numpy as np

from sphereot import sphere
from sphereot.fields import generate_nodes, normalize_density, uniform_density
from sphereot.transport import extract_map, map_from_potential, solve


def density(Z):
    return 1.0 + 0.1 * (Z[:, 0] * Z[:, 1] + 0.5 * Z[:, 2])


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--N", type=int, nargs="+", default=[1000])
    p.add_argument("--seed", type=int, default=4)
    args = p.parse_args()
    R = sphere.random_rotation(np.random.default_rng(args.seed), 3)
    for N in args.N:
        nodes = generate_nodes(2, N)
        X = nodes.points
        f1 = uniform_density(nodes)
        pot_maps, bary_maps = [], []
        for f in (density(X), density(X @ R)):
            _, plan, pot = solve(nodes, f1, normalize_density(f, nodes))
            pot_maps.append(map_from_potential(pot, nodes))
            bary_maps.append(extract_map(plan, nodes, nodes))
        for name, (T, T_rot) in (("potential", pot_maps), ("barycentric", bary_maps)):
            err = sphere.dist(T_rot(X @ R.T), T.images @ R.T).max()
            print(f"N={N:5d} {name:12s} sup error {err:.5f}   2h = {2 * nodes.h:.5f}")


if __name__ == "__main__":
    main()
