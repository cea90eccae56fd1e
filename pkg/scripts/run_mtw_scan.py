"""MTW positivity scan in several dimensions and cut margins.

    python scripts/run_mtw_scan.py --n 2 3 4 --samples 2000
"""
import argparse

import numpy as np

from sphereot.mtw import a3s_scan, mtw_values


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, nargs="+", default=[2, 3])
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--margins", type=float, nargs="+", default=[0.3, 0.5, 1.0])
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()
    for n in args.n:
        for margin in args.margins:
            rep = a3s_scan(n, args.samples, margin, args.seed)
            idx = rep.smallest(10)
            q = rep.queries
            fine = mtw_values(q["x"][idx], q["v0"][idx], q["xi"][idx], q["nu"][idx], richardson=True)
            print(f"n={n} margin={margin:.2f} theta_obs={rep.theta_obs:.6f} "
                  f"median={np.median(rep.values):.4f} max={rep.values.max():.2f} "
                  f"richardson_min={fine.min():.6f} failures={len(rep.failures)}")


if __name__ == "__main__":
    main()
