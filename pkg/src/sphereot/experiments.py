"""The experiment suites behind the command line.

Each ``run_*`` function takes an :class:`ExperimentConfig`, writes its artefacts
into ``cfg.out`` and returns the report dictionary that was written to
``report.json``.  Wall-clock timings go to a separate ``timings.json`` so that
the report itself is byte-reproducible.
"""
from __future__ import annotations

import logging
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__, io
from .analysis import (cutlocus_check, jacobian, lipschitz_norms, map_distance,
                       proof_chain_bound, regularity_monitor)
from .config import ExperimentConfig
from .errors import NonPositiveDensity, ValidationError
from .fields import (DensityField, NodeSet, centered_profile, conformal_metric, generate_nodes,
                     holder_norm, metric_holder_distance, metric_to_density, profile,
                     radius_from_volume, round_metric, uniform_density)
from .mtw import a3s_scan, mtw_values
from .transport import (duality_gap, extract_map, identity_map, ma_residual, map_from_potential,
                        solve)

log = logging.getLogger(__name__)

RICHARDSON_CHECK = 10


def versions():
    return {"sphereot": __version__, "numpy": np.__version__, "scipy": scipy.__version__}


class _Clock:
    def __init__(self):
        self.t = {}

    def __call__(self, key):
        clock = self

        class _Ctx:
            def __enter__(self):
                self.t0 = time.perf_counter()

            def __exit__(self, *exc):
                clock.t[key] = clock.t.get(key, 0.0) + time.perf_counter() - self.t0

        return _Ctx()


def _finish(cfg: ExperimentConfig, command: str, body: dict, clock: _Clock):
    out = Path(cfg.out)
    # the output location is not an experiment parameter; leaving it out of the
    # echo keeps reports written to different directories byte-identical
    echo = cfg.as_dict()
    del echo["out"]
    report = {"command": command, "config": echo, "versions": versions()}
    report.update(body)
    io.write_json(out / "report.json", report)
    io.write_json(out / "timings.json", clock.t)
    return report


def make_nodes(cfg: ExperimentConfig) -> NodeSet:
    return generate_nodes(cfg.n, cfg.N, cfg.scheme, cfg.k_neighbors, cfg.seed)


def solve_map(cfg: ExperimentConfig, nodes: NodeSet, f1: DensityField, f2: DensityField):
    """Entropic solve plus both map extractions; returns (plan, pot, T_primary, T_bary, gap)."""
    cost, plan, pot = solve(nodes, f1, f2, cfg.solver)
    T_bary = extract_map(plan, nodes, nodes, cfg.solver.cut_guard)
    T_pot = map_from_potential(pot, nodes, cfg.k_neighbors)
    mu = nodes.weights * f1.values
    gap = duality_gap(cost, plan, pot, mu, plan.coupling.sum(0))
    primary = T_pot if cfg.map_route == "potential_gradient" else T_bary
    return plan, pot, primary, T_bary, gap


def _solver_summary(plan, pot, gap):
    return {"iterations": pot.iterations, "eps_final": pot.eps, "row_error": plan.row_error,
            "col_error": plan.col_error, "duality_gap": gap}


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def run_nodes(cfg: ExperimentConfig):
    clock = _Clock()
    with clock("nodes"):
        nodes = make_nodes(cfg)
    io.write_json(Path(cfg.out) / "nodes.json", io.nodes_to_dict(nodes))
    summary = {"N": nodes.N, "h": nodes.h, "sum_weights": float(nodes.weights.sum())}
    return _finish(cfg, "nodes", {"nodes": summary}, clock)


def run_contraction(cfg: ExperimentConfig):
    clock = _Clock()
    out = Path(cfg.out)
    with clock("setup"):
        nodes = make_nodes(cfg)
        g = conformal_metric(nodes, cfg.rho, cfg.eps, profile(cfg.profile))
        f1 = uniform_density(nodes, cfg.alpha)
        f2 = metric_to_density(g, nodes, cfg.alpha)
        metric = {
            "kind": g.kind, "rho": cfg.rho, "eps": cfg.eps, "profile": cfg.profile,
            "radius_from_volume": radius_from_volume(g, nodes),
            "holder_distance_to_round": metric_holder_distance(g, round_metric(nodes, cfg.rho),
                                                               cfg.alpha, nodes),
        }
    with clock("solve"):
        plan, pot, T, T_bary, gap = solve_map(cfg, nodes, f1, f2)
    with clock("analysis"):
        lip = lipschitz_norms(jacobian(T, k=cfg.k_neighbors), T, g)
        lip_bary = lipschitz_norms(jacobian(T_bary, k=cfg.k_neighbors), T_bary, g)
        dist_id = map_distance(T, identity_map(nodes), cfg.alpha_prime, k=cfg.k_neighbors)
        cut = cutlocus_check(T, f1, f2)
        ma = ma_residual(pot, T, f1, f2, nodes, cfg.k_neighbors, cfg.solver.cut_guard)
        delta = dist_id.C0 + dist_id.C1
        chain = proof_chain_bound(cfg.rho, delta, cfg.n, g, nodes)
        pot_vs_bary = float(np.max(np.abs(T.displacement - T_bary.displacement)))
    verdict = f"CONTRACTION: {'yes' if lip.contraction else 'no'} (sup op norm = {lip.sup_op:.6f})"
    io.write_json(out / "nodes.json", io.nodes_to_dict(nodes, f2.values))
    io.write_json(out / "map.json", io.map_to_dict(T))
    io.write_json(out / "map_barycentric.json", io.map_to_dict(T_bary))
    io.write_json(out / "potentials.json", io.potentials_to_dict(pot))
    io.write_map_csv(out / "map.csv", T)
    body = {
        "nodes": {"N": nodes.N, "h": nodes.h, "sum_weights": float(nodes.weights.sum())},
        "metric": metric,
        "density": {"target_min": f2.min, "target_max": f2.max},
        "solver": _solver_summary(plan, pot, gap),
        "map_route": cfg.map_route,
        "lipschitz": lip.summary(),
        "lipschitz_barycentric": lip_bary.summary(),
        "map_distance_to_identity": dist_id.as_dict(),
        "delta": delta,
        "cut_locus": cut.as_dict(),
        "ma_residual": {"sup": ma.sup, "sup_relative": ma.sup_relative},
        "proof_chain": chain.as_dict(),
        "route_agreement": pot_vs_bary,
        "verdict": verdict,
    }
    return _finish(cfg, "contraction", body, clock)


def stability_density(psi, eps, alpha, nodes: NodeSet) -> DensityField:
    """1 + eps * psi / ||psi||_{C^{0,alpha}}; psi must have zero quadrature mean."""
    if eps == 0:
        return uniform_density(nodes, alpha)
    scale = eps / holder_norm(psi, alpha, nodes)
    values = 1.0 + scale * psi
    if np.any(values <= 0):
        raise NonPositiveDensity(f"perturbation of size {eps} makes the density nonpositive")
    return DensityField(values=values, alpha=alpha)


def run_stability(cfg: ExperimentConfig):
    if len(cfg.eps_list) < 2:
        raise ValidationError("stability needs an eps_list with at least two entries")
    clock = _Clock()
    out = Path(cfg.out)
    nodes = make_nodes(cfg)
    f1 = uniform_density(nodes, cfg.alpha)
    psi = centered_profile(cfg.profile, nodes)
    ident = identity_map(nodes)
    rows, seq, runs = [], [], []
    for eps in cfg.eps_list:
        log.info("stability: eps = %g", eps)
        with clock(f"solve[{eps!r}]"):
            f = stability_density(psi, eps, cfg.alpha, nodes)
            plan, pot, T, _, gap = solve_map(cfg, nodes, f1, f)
        with clock(f"analysis[{eps!r}]"):
            dist = map_distance(T, ident, cfg.alpha_prime, k=cfg.k_neighbors)
            hf = holder_norm(f.values - 1.0, cfg.alpha, nodes)
        rows.append([eps, dist.C0, dist.C1, dist.holder_C1, dist.combined, hf])
        seq.append((eps, pot, T))
        runs.append({"eps": eps, "solver": _solver_summary(plan, pot, gap),
                     "map_distance_to_identity": dist.as_dict(), "holder_norm_f_minus_1": hf})
        io.write_json(out / f"map_eps{len(runs) - 1}.json", io.map_to_dict(T))
    with clock("regularity"):
        table = regularity_monitor(seq, cfg.alpha, nodes, cfg.k_neighbors)
    io.write_csv(out / "curve.csv", ["eps", "C0", "C1", "holder_C1", "combined", "holder_f_minus_1"],
                 rows)
    io.write_json(out / "nodes.json", io.nodes_to_dict(nodes, psi))
    combined = [r[4] for r in rows]
    trend = {
        "nonincreasing_within_10pct": all(b <= 1.1 * a for a, b in zip(combined, combined[1:])),
        "final_over_initial": combined[-1] / combined[0] if combined[0] > 0 else None,
        "regularity_bounded": table.bounded,
    }
    body = {"map_route": cfg.map_route, "runs": runs, "regularity": table.as_dict(),
            "trend": trend}
    return _finish(cfg, "stability", body, clock)


def run_mtw(cfg: ExperimentConfig):
    clock = _Clock()
    with clock("scan"):
        rep = a3s_scan(cfg.n, cfg.samples, cfg.cut_margin, cfg.seed)
    with clock("richardson"):
        idx = rep.smallest(min(RICHARDSON_CHECK, rep.samples))
        q = rep.queries
        refined = mtw_values(q["x"][idx], q["v0"][idx], q["xi"][idx], q["nu"][idx],
                             rep.t_step, rep.hess_step, richardson=True)
    body = {"mtw": rep.as_dict(),
            "richardson": {"indices": [int(i) for i in idx], "coarse": rep.values[idx],
                           "refined": refined, "sign_confirmed": bool(np.all(refined > 0))}}
    return _finish(cfg, "mtw", body, clock)


def run_compare(cfg: ExperimentConfig, path_a, path_b):
    clock = _Clock()
    with clock("compare"):
        da, db = io.read_json(path_a), io.read_json(path_b)
        A = io.map_from_dict(da)
        B = io.map_from_dict(db, A.source)
        dist = map_distance(A, B, cfg.alpha_prime, k=cfg.k_neighbors)
    body = {"maps": [str(path_a), str(path_b)], "map_distance": dist.as_dict()}
    return _finish(cfg, "compare", body, clock)
