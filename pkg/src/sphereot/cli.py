"""Command line: ``sphereot {nodes,contraction,stability,mtw,compare}``.

Exit codes: 0 success, 2 validation error, 3 solver non-convergence,
4 analysis error.
"""
from __future__ import annotations

import argparse
import contextlib
import logging
import sys

from . import config as config_mod
from . import experiments
from .errors import AnalysisError, SolverError, ValidationError

EXIT_OK, EXIT_VALIDATION, EXIT_SOLVER, EXIT_ANALYSIS = 0, 2, 3, 4


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--out", help="output directory (overrides config)")
    common.add_argument("--seed", type=int, help="random seed (overrides config)")
    common.add_argument("--threads", type=int, help="BLAS thread count")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config key; solver keys as solver.NAME")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="sphereot", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("nodes", parents=[common], help="generate and save a node set")
    sub.add_parser("contraction", parents=[common], help="Lipschitz test of the transport map")
    sub.add_parser("stability", parents=[common], help="stability curve over eps_list")
    sub.add_parser("mtw", parents=[common], help="sampled MTW positivity scan")
    cmp_ = sub.add_parser("compare", parents=[common], help="C^{1,a'} distance of two map files")
    cmp_.add_argument("map_a")
    cmp_.add_argument("map_b")
    return p


def _threads(n):
    if n is None:
        return contextlib.nullcontext()
    if n < 1:
        raise ValidationError("--threads must be >= 1")
    from threadpoolctl import threadpool_limits
    return threadpool_limits(limits=n)


def _print_summary(command, report):
    if command == "nodes":
        s = report["nodes"]
        print(f"N = {s['N']}  h = {s['h']:.6g}  sum(weights) = {s['sum_weights']:.12g}")
    elif command == "contraction":
        print(report["verdict"])
        pc = report["proof_chain"]
        print(f"delta = {report['delta']:.4g}  K_rho = {pc['K_rho']:.4g}  "
              f"proof-chain bound = {pc['bound']:.4g}  "
              f"contraction_possible = {pc['contraction_possible']}")
    elif command == "stability":
        for r in report["runs"]:
            print(f"eps = {r['eps']:<8g} combined = {r['map_distance_to_identity']['combined']:.6g}")
        print(f"regularity bounded: {report['regularity']['bounded']}")
    elif command == "mtw":
        print(f"theta_obs = {report['mtw']['theta_obs']:.6g}  "
              f"failures = {len(report['mtw']['failures'])}  "
              f"richardson sign confirmed = {report['richardson']['sign_confirmed']}")
    elif command == "compare":
        d = report["map_distance"]
        print(" ".join(f"{k} = {d[k]:.6g}" for k in ("C0", "C1", "holder_C1", "combined")))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_mod.load(args.config, args.set, out=args.out, seed=args.seed)
        with _threads(args.threads):
            if args.command == "compare":
                report = experiments.run_compare(cfg, args.map_a, args.map_b)
            else:
                report = getattr(experiments, f"run_{args.command}")(cfg)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except AnalysisError as exc:
        print(f"analysis error: {exc}", file=sys.stderr)
        return EXIT_ANALYSIS
    _print_summary(args.command, report)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
