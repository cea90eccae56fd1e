import sys
from pathlib import Path
from types import SimpleNamespace

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from sphereot.fields import (conformal_metric, generate_nodes, metric_to_density, profile,  # noqa: E402
                             uniform_density)
from sphereot.transport import SolverConfig, extract_map, map_from_potential, solve  # noqa: E402


@pytest.fixture(scope="session")
def solved():
    """Memoised uniform -> conformal((1 + eps p1) g_rho) solves on Fibonacci nodes.

    ``solved(N, eps)`` returns a namespace with nodes, metric, densities, cost,
    plan, potentials and both map extractions.  eps = 0 is the uniform target.
    """
    cache = {}

    def get(N, eps, rho=0.8, eps_final=1e-3):
        key = (N, eps, rho, eps_final)
        if key not in cache:
            nodes = generate_nodes(2, N)
            g = conformal_metric(nodes, rho, eps, profile("p1"))
            f1 = uniform_density(nodes)
            f2 = metric_to_density(g, nodes)
            cost, plan, pot = solve(nodes, f1, f2, SolverConfig(eps_final=eps_final))
            cache[key] = SimpleNamespace(
                nodes=nodes, g=g, f1=f1, f2=f2, cost=cost, plan=plan, pot=pot,
                T_pot=map_from_potential(pot, nodes), T_bary=extract_map(plan, nodes, nodes))
        return cache[key]

    return get


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import RESULTS
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(RESULTS):
            terminalreporter.write_line(line)
