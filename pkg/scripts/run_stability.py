"""Stability curve: distance of T_eps to the identity along a decreasing eps list.

    python scripts/run_stability.py --eps 0.1 0.05 0.02 0.01 --profile p1
"""
import argparse

from sphereot.config import ExperimentConfig
from sphereot.experiments import run_stability


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--eps", type=float, nargs="+", default=[0.1, 0.05, 0.02, 0.01])
    p.add_argument("--N", type=int, default=2000)
    p.add_argument("--profile", default="p1", choices=["p1", "p2", "p3"])
    p.add_argument("--route", default="potential_gradient", choices=["potential_gradient", "barycentric"])
    p.add_argument("--out", default="runs/stability")
    args = p.parse_args()
    cfg = ExperimentConfig(N=args.N, eps_list=tuple(args.eps), profile=args.profile,
                           map_route=args.route, out=args.out)
    rep = run_stability(cfg)
    for r in rep["runs"]:
        d = r["map_distance_to_identity"]
        print(f"eps={r['eps']:<6g} C0={d['C0']:.5f} C1={d['C1']:.5f} "
              f"holder={d['holder_C1']:.5f} combined={d['combined']:.5f}")
    print("trend:", rep["trend"])


if __name__ == "__main__":
    main()
